#include "latentmark/attacks/attacks.hpp"

#include <fstream>
#include <sstream>

namespace latentmark::attacks {

std::string kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::center_crop: return "center_crop";
        case AttackKind::random_crop: return "random_crop";
        case AttackKind::rotation: return "rotation";
        case AttackKind::resize: return "resize";
        case AttackKind::brightness: return "brightness";
        case AttackKind::contrast: return "contrast";
        case AttackKind::gaussian_noise: return "gaussian_noise";
        case AttackKind::blur: return "blur";
        case AttackKind::jpeg: return "jpeg";
        case AttackKind::identity: return "identity";
        case AttackKind::combined: return "combined";
        case AttackKind::reencode: return "reencode";
    }
    return "?";
}

AttackKind kind_from_name(const std::string& name) {
    for (int i = 0; i <= static_cast<int>(AttackKind::reencode); ++i) {
        const auto k = static_cast<AttackKind>(i);
        if (kind_name(k) == name) return k;
    }
    throw ParseError("unknown attack kind '" + name + "'");
}

namespace {

void fail_range(AttackKind kind, double p, double lo, double hi) {
    std::ostringstream os;
    os << "attack " << kind_name(kind) << ": parameter " << p << " outside legal range [" << lo << ", "
       << hi << "]";
    throw ValidationError(os.str());
}

}  // namespace

void validate_attack(const AttackSpec& s) {
    const double p = s.parameter;
    switch (s.kind) {
        case AttackKind::center_crop:
        case AttackKind::random_crop:
            if (p < 0.08 || p > 0.95) fail_range(s.kind, p, 0.08, 0.95);
            break;
        case AttackKind::rotation: {
            const double m = std::abs(p);
            if (m < 2.0 || m > 46.0)
                throw ValidationError("attack rotation: |angle| " + std::to_string(m) +
                                      " outside legal range [2, 46] degrees");
            break;
        }
        case AttackKind::resize:
            if (p < 0.5 || p > 1.5) fail_range(s.kind, p, 0.5, 1.5);
            break;
        case AttackKind::brightness:
            if (p < 0.0 || p > 3.0) fail_range(s.kind, p, 0.0, 3.0);
            break;
        case AttackKind::contrast:
            if (p < 0.0 || p > 3.0) fail_range(s.kind, p, 0.0, 3.0);
            break;
        case AttackKind::gaussian_noise:
            if (p < 0.0 || p > 0.05) fail_range(s.kind, p, 0.0, 0.05);
            break;
        case AttackKind::blur: {
            const auto ki = static_cast<int64_t>(std::llround(p));
            if (ki < 3 || ki > 19 || ki % 2 == 0)
                throw ValidationError("attack blur: kernel " + std::to_string(ki) +
                                      " must be an odd size in [3, 19]");
            break;
        }
        case AttackKind::jpeg:
            if (p < 40 || p > 100) fail_range(s.kind, p, 40, 100);
            break;
        case AttackKind::identity:
        case AttackKind::combined:
            break;
        case AttackKind::reencode: {
            const auto f = static_cast<int>(std::llround(p));
            if (f != 4 && f != 8 && f != 16 && f != 32)
                throw ValidationError("attack reencode: downsampling factor " + std::to_string(f) +
                                      " must be one of {4,8,16,32}");
            break;
        }
    }
}

CropRect crop_rect(const AttackSpec& spec, int64_t H, int64_t W) {
    const double side = std::sqrt(spec.parameter);
    CropRect r;
    r.h = std::clamp<int64_t>(std::llround(side * static_cast<double>(H)), 1, H);
    r.w = std::clamp<int64_t>(std::llround(side * static_cast<double>(W)), 1, W);
    if (spec.kind == AttackKind::random_crop) {
        Rng rng(spec.seed ^ 0xc209ULL);
        r.y0 = rng.uniform_int(0, H - r.h);
        r.x0 = rng.uniform_int(0, W - r.w);
    } else {
        r.y0 = (H - r.h) / 2;
        r.x0 = (W - r.w) / 2;
    }
    return r;
}

AttackSpec sample_attack(const AttackSampler& sampler, Rng& rng) {
    check(sampler.active, "sample_attack: sampler is not active yet");
    AttackSpec s;
    s.kind = kTrainingKinds[rng.uniform_int(0, 9)];
    switch (s.kind) {
        case AttackKind::center_crop:
        case AttackKind::random_crop:
            s.parameter = rng.uniform(sampler.crop_area.lo, sampler.crop_area.hi);
            break;
        case AttackKind::rotation: {
            const double mag = rng.uniform(sampler.rotation_deg.lo, sampler.rotation_deg.hi);
            s.parameter = rng.bernoulli(0.5) ? mag : -mag;
            break;
        }
        case AttackKind::resize:
            s.parameter = rng.uniform(sampler.resize_area.lo, sampler.resize_area.hi);
            break;
        case AttackKind::brightness:
            s.parameter = rng.uniform(sampler.brightness.lo, sampler.brightness.hi);
            break;
        case AttackKind::contrast:
            s.parameter = rng.uniform(sampler.contrast.lo, sampler.contrast.hi);
            break;
        case AttackKind::gaussian_noise:
            s.parameter = rng.uniform(sampler.noise_sigma.lo, sampler.noise_sigma.hi);
            break;
        case AttackKind::blur:
            s.parameter = static_cast<double>(3 + 2 * rng.uniform_int(0, 8));
            break;
        case AttackKind::jpeg:
            s.parameter = std::round(rng.uniform(sampler.jpeg_quality.lo, sampler.jpeg_quality.hi));
            break;
        default:
            s.parameter = 0.0;
            break;
    }
    s.seed = rng.next_u64();
    return s;
}

ImageGrid apply_attack(const AttackSpec& spec, const ImageGrid& img) {
    nn::Graph<real_t> g;
    auto out = apply_attack_var(g, spec, g.constant(to_batch(img.values)));
    return ImageGrid(from_batch(out->value), ImageSource::attacked);
}

ImageGrid combined_attack(const ImageGrid& img) {
    return apply_attack(AttackSpec{AttackKind::combined, 0.0, 0}, img);
}

ImageGrid reencode_attack(const ae::Autoencoder& autoenc, const ImageGrid& img) {
    ImageGrid out = autoenc.decode(autoenc.encode(img));
    out.source = ImageSource::attacked;
    return out;
}

std::vector<NamedAttack> default_attack_presets() {
    return {
        {"None", {AttackKind::identity, 0, 0}},
        {"C. Crop 0.1", {AttackKind::center_crop, 0.1, 0}},
        {"C. Crop 0.5", {AttackKind::center_crop, 0.5, 0}},
        {"R. Crop 0.1", {AttackKind::random_crop, 0.1, 7}},
        {"Resize 0.7", {AttackKind::resize, 0.7, 0}},
        {"Rot. 15", {AttackKind::rotation, 15, 0}},
        {"Blur 11", {AttackKind::blur, 11, 0}},
        {"Contr. 2.0", {AttackKind::contrast, 2.0, 0}},
        {"Bright. 2.0", {AttackKind::brightness, 2.0, 0}},
        {"JPEG 70", {AttackKind::jpeg, 70, 0}},
        {"Comb.", {AttackKind::combined, 0, 0}},
    };
}

std::vector<NamedAttack> parse_attack_presets(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open attack preset file: " + path);
    std::vector<NamedAttack> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::stringstream ss(line);
        std::string name, kind, param;
        if (!std::getline(ss, name, '\t') || !std::getline(ss, kind, '\t') || !std::getline(ss, param))
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected name<TAB>kind<TAB>parameter");
        NamedAttack na;
        na.name = name;
        na.spec.kind = kind_from_name(kind);
        try {
            na.spec.parameter = std::stod(param);
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad parameter '" + param + "'");
        }
        validate_attack(na.spec);
        out.push_back(std::move(na));
    }
    return out;
}

void write_attack_presets(const std::string& path, const std::vector<NamedAttack>& presets) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write attack preset file: " + path);
    f << "# name\tkind\tparameter\n";
    for (const auto& p : presets) f << p.name << "\t" << kind_name(p.spec.kind) << "\t" << p.spec.parameter << "\n";
}

}  // namespace latentmark::attacks
