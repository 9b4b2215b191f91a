#include "latentmark/core/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "latentmark/core/check.hpp"

namespace latentmark {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

}  // namespace

int WatermarkConfig::num_upsample_stages() const {
    return static_cast<int>(std::lround(std::log2(static_cast<double>(downsample_factor))));
}

void WatermarkConfig::validate() const {
    check(k >= 1, "config: k must be >= 1 (got " + std::to_string(k) + ")");
    check(B >= 1, "config: B must be >= 1 (got " + std::to_string(B) + ")");
    check(downsample_factor == 4 || downsample_factor == 8 || downsample_factor == 16 ||
              downsample_factor == 32,
          "config: downsample_factor must be one of {4,8,16,32} (got " +
              std::to_string(downsample_factor) + ")");
    check(lambda_I >= 0, "config: lambda_I must be >= 0");
    check(lambda_LPIPS >= 0, "config: lambda_LPIPS must be >= 0");
    check(lambda_adv >= 0, "config: lambda_adv must be >= 0");
    check(lambda >= 0, "config: lambda must be >= 0");
    check(!stage_channels.empty(), "config: stage_channels must be nonempty");
    for (int c : stage_channels) check(c >= 1, "config: stage_channels entries must be >= 1");
    check(static_cast<int>(stage_channels.size()) >= num_upsample_stages(),
          "config: stage_channels lists " + std::to_string(stage_channels.size()) +
              " stages but downsample_factor " + std::to_string(downsample_factor) + " needs at least " +
              std::to_string(num_upsample_stages()) + " upsampling stages");
    check(latent_channels >= 1, "config: latent_channels must be >= 1");
    check(image_size >= downsample_factor, "config: image_size must be >= downsample_factor");
    check(image_size % downsample_factor == 0, "config: image_size must be divisible by downsample_factor");
    check(learning_rate > 0, "config: learning_rate must be > 0");
    check(ae_learning_rate > 0, "config: ae_learning_rate must be > 0");
    check(epochs >= 1 && ae_epochs >= 1, "config: epochs must be >= 1");
    check(batch_size >= 1, "config: batch_size must be >= 1");
    check(attack_threshold >= 0 && attack_threshold <= 1, "config: attack_threshold must be in [0,1]");
    check(lr_schedule == "constant" || lr_schedule == "cosine",
          "config: lr_schedule must be constant or cosine");
    check(gp_weight >= 0, "config: gp_weight must be >= 0");
    check(corpus_size >= 2, "config: corpus_size must be >= 2");
}

WatermarkConfig WatermarkConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file: " + path);
    WatermarkConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "k") c.k = std::stoi(val);
            else if (key == "B") c.B = std::stoi(val);
            else if (key == "stage_channels") c.stage_channels = parse_int_list(val);
            else if (key == "downsample_factor") c.downsample_factor = std::stoi(val);
            else if (key == "latent_channels") c.latent_channels = std::stoi(val);
            else if (key == "image_size") c.image_size = std::stoi(val);
            else if (key == "lambda_I") c.lambda_I = std::stod(val);
            else if (key == "lambda_LPIPS") c.lambda_LPIPS = std::stod(val);
            else if (key == "lambda_adv") c.lambda_adv = std::stod(val);
            else if (key == "lambda") c.lambda = std::stod(val);
            else if (key == "learning_rate") c.learning_rate = std::stod(val);
            else if (key == "lr_schedule") c.lr_schedule = val;
            else if (key == "epochs") c.epochs = std::stoi(val);
            else if (key == "batch_size") c.batch_size = std::stoi(val);
            else if (key == "steps_per_epoch") c.steps_per_epoch = std::stoi(val);
            else if (key == "attack_threshold") c.attack_threshold = std::stod(val);
            else if (key == "seed") c.seed = std::stoull(val);
            else if (key == "ae_learning_rate") c.ae_learning_rate = std::stod(val);
            else if (key == "ae_epochs") c.ae_epochs = std::stoi(val);
            else if (key == "gp_weight") c.gp_weight = std::stod(val);
            else if (key == "corpus_size") c.corpus_size = std::stoi(val);
            else if (key == "perceptual_weights") c.perceptual_weights = val;
            else throw ParseError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad value for '" + key + "'");
        }
    }
    c.validate();
    return c;
}

std::string WatermarkConfig::dump() const {
    std::ostringstream os;
    os << "k = " << k << "\n";
    os << "B = " << B << "\n";
    os << "stage_channels = ";
    for (size_t i = 0; i < stage_channels.size(); ++i) os << (i ? "," : "") << stage_channels[i];
    os << "\n";
    os << "downsample_factor = " << downsample_factor << "\n";
    os << "latent_channels = " << latent_channels << "\n";
    os << "image_size = " << image_size << "\n";
    os.precision(17);
    os << "lambda_I = " << lambda_I << "\n";
    os << "lambda_LPIPS = " << lambda_LPIPS << "\n";
    os << "lambda_adv = " << lambda_adv << "\n";
    os << "lambda = " << lambda << "\n";
    os << "learning_rate = " << learning_rate << "\n";
    os << "lr_schedule = " << lr_schedule << "\n";
    os << "epochs = " << epochs << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "steps_per_epoch = " << steps_per_epoch << "\n";
    os << "attack_threshold = " << attack_threshold << "\n";
    os << "seed = " << seed << "\n";
    os << "ae_learning_rate = " << ae_learning_rate << "\n";
    os << "ae_epochs = " << ae_epochs << "\n";
    os << "gp_weight = " << gp_weight << "\n";
    os << "corpus_size = " << corpus_size << "\n";
    if (!perceptual_weights.empty()) os << "perceptual_weights = " << perceptual_weights << "\n";
    return os.str();
}

void WatermarkConfig::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write config file: " + path);
    f << dump();
}

}  // namespace latentmark
