#include "latentmark/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "latentmark/attacks/attacks.hpp"
#include "latentmark/core/config.hpp"
#include "latentmark/data/corpus.hpp"
#include "latentmark/embedder/embedder.hpp"
#include "latentmark/evalx/eval.hpp"
#include "latentmark/evalx/plot.hpp"
#include "latentmark/extractor/extractor.hpp"
#include "latentmark/io/image_io.hpp"
#include "latentmark/matching/matching.hpp"
#include "latentmark/trainer/trainer.hpp"

namespace latentmark::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config_path;
    std::string run_dir;
    uint64_t seed = 0;
    bool seed_set = false;

    WatermarkConfig config() const {
        WatermarkConfig c = config_path.empty() ? WatermarkConfig{} : WatermarkConfig::load(config_path);
        if (seed_set) c.seed = seed;
        c.validate();
        return c;
    }
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_run_dir) {
    cmd->add_option("--config", c.config_path, "flat key=value config file");
    cmd->add_option("--run-dir", c.run_dir, "output directory")->default_val(default_run_dir);
    cmd->add_option("--seed", c.seed, "override the config random seed")
        ->each([&c](const std::string&) { c.seed_set = true; });
}

// every run records enough to replay it bit-identically
void write_manifest(const Common& c, const WatermarkConfig& cfg, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& checksums,
                    const std::vector<std::string>& outputs) {
    fs::create_directories(c.run_dir);
    nlohmann::json m;
    m["command"] = command;
    m["seed"] = cfg.seed;
    m["config"] = cfg.dump();
    for (const auto& [name, sum] : checksums) m["checkpoint_checksums"][name] = sum;
    m["outputs"] = outputs;
    std::ofstream f(c.run_dir + "/manifest.json");
    if (!f) throw IoError("cannot write manifest in " + c.run_dir);
    f << m.dump(2) << "\n";
}

data::SyntheticCorpus make_corpus(const WatermarkConfig& cfg) {
    return data::SyntheticCorpus(cfg.corpus_size, cfg.image_size, cfg.seed ^ 0xc0ffeeULL);
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"latent-space image watermarking toolkit"};
    app.require_subcommand(1);

    // ---- pretrain-ae ----
    Common c_pre;
    std::string pre_out;
    auto* cmd_pre = app.add_subcommand("pretrain-ae", "train the reference autoencoder");
    add_common(cmd_pre, c_pre, "runs/pretrain-ae");
    cmd_pre->add_option("--out", pre_out, "checkpoint path (default <run-dir>/autoencoder.ckpt)");

    // ---- train ----
    Common c_tr;
    std::string tr_ae, tr_resume;
    auto* cmd_tr = app.add_subcommand("train", "train watermark embedder + extractor");
    add_common(cmd_tr, c_tr, "runs/train");
    cmd_tr->add_option("--ae", tr_ae, "frozen autoencoder checkpoint")->required();
    cmd_tr->add_option("--resume", tr_resume, "continue from checkpoints in this directory");

    // ---- generate ----
    Common c_gen;
    std::string gen_ae, gen_emb, gen_msg, gen_out, gen_clean_out, gen_source = "encoder";
    int64_t gen_index = 0;
    uint64_t gen_msg_seed = 0;
    bool gen_msg_seed_set = false;
    auto* cmd_gen = app.add_subcommand("generate", "decode a latent with the watermark");
    add_common(cmd_gen, c_gen, "runs/generate");
    cmd_gen->add_option("--ae", gen_ae)->required();
    cmd_gen->add_option("--embedder", gen_emb)->required();
    cmd_gen->add_option("--message", gen_msg, "hex message");
    cmd_gen->add_option("--message-seed", gen_msg_seed)->each([&](const std::string&) { gen_msg_seed_set = true; });
    cmd_gen->add_option("--source", gen_source, "latent source: encoder|gaussian");
    cmd_gen->add_option("--index", gen_index, "corpus image index for --source encoder");
    cmd_gen->add_option("--out", gen_out, "watermarked image (default <run-dir>/generated.png)");
    cmd_gen->add_option("--clean-out", gen_clean_out, "optionally also write the unwatermarked decode");

    // ---- embed ----
    Common c_emb;
    std::string emb_ae, emb_stack, emb_in, emb_msg, emb_out;
    auto* cmd_emb = app.add_subcommand("embed", "watermark a cover image (post-generation)");
    add_common(cmd_emb, c_emb, "runs/embed");
    cmd_emb->add_option("--ae", emb_ae)->required();
    cmd_emb->add_option("--embedder", emb_stack)->required();
    cmd_emb->add_option("--in", emb_in, "cover image (png)")->required();
    cmd_emb->add_option("--message", emb_msg, "hex message")->required();
    cmd_emb->add_option("--out", emb_out, "output image (default <run-dir>/watermarked.png)");

    // ---- extract ----
    Common c_ext;
    std::string ext_ckpt, ext_in;
    auto* cmd_ext = app.add_subcommand("extract", "extract the message bits from an image");
    add_common(cmd_ext, c_ext, "runs/extract");
    cmd_ext->add_option("--extractor", ext_ckpt)->required();
    cmd_ext->add_option("--in", ext_in)->required();

    // ---- detect ----
    Common c_det;
    std::string det_ckpt, det_in, det_msg;
    int det_n = -1;
    double det_fpr = 1e-6;
    auto* cmd_det = app.add_subcommand("detect", "match an image against one message");
    add_common(cmd_det, c_det, "runs/detect");
    cmd_det->add_option("--extractor", det_ckpt)->required();
    cmd_det->add_option("--in", det_in)->required();
    cmd_det->add_option("--message", det_msg, "hex message")->required();
    cmd_det->add_option("--n", det_n, "matching threshold (overrides --target-fpr)");
    cmd_det->add_option("--target-fpr", det_fpr, "detection FPR target used to solve n");

    // ---- attribute ----
    Common c_att;
    std::string att_ckpt, att_in, att_reg;
    int att_n = -1;
    double att_fpr = 1e-6;
    auto* cmd_att = app.add_subcommand("attribute", "match an image against a user registry");
    add_common(cmd_att, c_att, "runs/attribute");
    cmd_att->add_option("--extractor", att_ckpt)->required();
    cmd_att->add_option("--in", att_in)->required();
    cmd_att->add_option("--registry", att_reg, "user_id<TAB>hex message file")->required();
    cmd_att->add_option("--n", att_n, "matching threshold (overrides --target-fpr)");
    cmd_att->add_option("--target-fpr", att_fpr, "attribution FPR target used to solve n");

    // ---- attack ----
    Common c_atk;
    std::string atk_in, atk_kind, atk_out, atk_ae;
    double atk_param = 0;
    uint64_t atk_seed = 0;
    auto* cmd_atk = app.add_subcommand("attack", "apply a named image transformation");
    add_common(cmd_atk, c_atk, "runs/attack");
    cmd_atk->add_option("--in", atk_in)->required();
    cmd_atk->add_option("--kind", atk_kind, "attack kind")->required();
    cmd_atk->add_option("--parameter", atk_param);
    cmd_atk->add_option("--attack-seed", atk_seed, "seed for stochastic attacks");
    cmd_atk->add_option("--reencode-ae", atk_ae, "autoencoder checkpoint for --kind reencode");
    cmd_atk->add_option("--out", atk_out, "output image (default <run-dir>/attacked.png)");

    // ---- eval ----
    Common c_ev;
    std::string ev_ae, ev_emb, ev_ext, ev_presets, ev_reenc;
    int ev_images = 64, ev_msgs = 5;
    bool ev_postgen = false;
    auto* cmd_ev = app.add_subcommand("eval", "bit-accuracy table over attack presets");
    add_common(cmd_ev, c_ev, "runs/eval");
    cmd_ev->add_option("--ae", ev_ae)->required();
    cmd_ev->add_option("--embedder", ev_emb)->required();
    cmd_ev->add_option("--extractor", ev_ext)->required();
    cmd_ev->add_option("--presets", ev_presets, "attack preset file (default built-in set)");
    cmd_ev->add_option("--images", ev_images);
    cmd_ev->add_option("--messages", ev_msgs, "messages per image");
    cmd_ev->add_flag("--post-gen", ev_postgen, "evaluate the post-generation path");
    cmd_ev->add_option("--reencode-ae", ev_reenc, "autoencoder used by reencode presets");

    // ---- fpr-table ----
    Common c_fpr;
    int fpr_k = 48, fpr_nmin = 0, fpr_nmax = -1;
    int64_t fpr_users = 0;
    auto* cmd_fpr = app.add_subcommand("fpr-table", "theoretical FPR per matching threshold");
    add_common(cmd_fpr, c_fpr, "runs/fpr-table");
    cmd_fpr->add_option("--k", fpr_k);
    cmd_fpr->add_option("--n-min", fpr_nmin);
    cmd_fpr->add_option("--n-max", fpr_nmax);
    cmd_fpr->add_option("--num-users", fpr_users, "also tabulate the attribution FPR for N users");

    // ---- simulate-attribution ----
    Common c_sim;
    int64_t sim_users = 10000;
    int sim_ipu = 2, sim_k = 48;
    double sim_p = 0.0, sim_target = 1e-6;
    auto* cmd_sim = app.add_subcommand("simulate-attribution", "Monte Carlo attribution accuracy");
    add_common(cmd_sim, c_sim, "runs/simulate-attribution");
    cmd_sim->add_option("--num-users", sim_users);
    cmd_sim->add_option("--images-per-user", sim_ipu);
    cmd_sim->add_option("--flip-p", sim_p, "per-bit flip probability");
    cmd_sim->add_option("--target-fpr", sim_target);
    cmd_sim->add_option("--k", sim_k);

    // ---- plot ----
    Common c_plot;
    std::string plot_metrics, plot_eval, plot_out;
    int plot_fpr_k = 0;
    auto* cmd_plot = app.add_subcommand("plot", "emit an SVG chart from run artifacts");
    add_common(cmd_plot, c_plot, "runs/plot");
    cmd_plot->add_option("--metrics", plot_metrics, "metrics.jsonl from a training run");
    cmd_plot->add_option("--eval", plot_eval, "eval table tsv");
    cmd_plot->add_option("--fpr-k", plot_fpr_k, "plot the FPR curve for this k");
    cmd_plot->add_option("--out", plot_out, "output svg (default <run-dir>/plot.svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(cmd_pre)) {
            const auto cfg = c_pre.config();
            fs::create_directories(c_pre.run_dir);
            if (pre_out.empty()) pre_out = c_pre.run_dir + "/autoencoder.ckpt";
            auto corpus = make_corpus(cfg);
            ae::Autoencoder ae(cfg, cfg.seed);
            const double held = ae.pretrain(corpus, cfg, &std::cout);
            ae.save(pre_out);
            write_manifest(c_pre, cfg, "pretrain-ae", {{"autoencoder", ae.weights_checksum()}}, {pre_out});
            std::cout << "holdout_psnr " << held << "\nwrote " << pre_out << "\n";
        } else if (app.got_subcommand(cmd_tr)) {
            const auto cfg = c_tr.config();
            auto corpus = make_corpus(cfg);
            auto ae = ae::Autoencoder::load_file(tr_ae);
            std::optional<embedder::EmbedderStack> stack;
            std::optional<extractor::Extractor> ext;
            std::optional<trainer::Critic> critic;
            if (!tr_resume.empty()) {
                stack = embedder::EmbedderStack::load_file(tr_resume + "/embedder.ckpt", ae);
                ext = extractor::Extractor::load_file(tr_resume + "/extractor.ckpt");
                critic = trainer::Critic::load_file(tr_resume + "/critic.ckpt");
            } else {
                stack.emplace(ae, cfg.k, cfg.B, cfg.seed);
                ext.emplace(cfg.k, cfg.image_size, cfg.seed);
                critic.emplace(cfg.seed);
            }
            trainer::TrainOptions topt;
            topt.run_dir = c_tr.run_dir;
            topt.log = &std::cout;
            const auto res = trainer::train(ae, *stack, *ext, *critic, corpus, cfg, topt);
            write_manifest(c_tr, cfg, "train",
                           {{"autoencoder", ae.weights_checksum()},
                            {"embedder", stack->weights_checksum()}},
                           {c_tr.run_dir + "/embedder.ckpt", c_tr.run_dir + "/extractor.ckpt"});
            std::cout << "final bit_acc ema " << res.bit_acc_ema << " after " << res.steps << " steps\n";
        } else if (app.got_subcommand(cmd_gen)) {
            const auto cfg = c_gen.config();
            fs::create_directories(c_gen.run_dir);
            auto ae = ae::Autoencoder::load_file(gen_ae);
            auto stack = embedder::EmbedderStack::load_file(gen_emb, ae);
            BitMessage m = !gen_msg.empty() ? BitMessage::from_hex(gen_msg, stack.k())
                                            : BitMessage::random(stack.k(), gen_msg_seed_set ? gen_msg_seed : cfg.seed);
            LatentGrid z;
            if (gen_source == "encoder") {
                auto corpus = make_corpus(cfg);
                z = ae.encode(ImageGrid(corpus.get(gen_index), ImageSource::cover));
            } else if (gen_source == "gaussian") {
                Rng rng(cfg.seed ^ 0x9a55ULL);
                nn::Tensor<real_t> zv({ae.latent_channels(), cfg.image_size / ae.f(), cfg.image_size / ae.f()});
                for (int64_t i = 0; i < zv.numel(); ++i) zv[i] = static_cast<real_t>(rng.normal());
                z = LatentGrid(std::move(zv), 0);
            } else {
                throw ValidationError("generate: --source must be encoder or gaussian");
            }
            if (gen_out.empty()) gen_out = c_gen.run_dir + "/generated.png";
            ImageGrid xw = stack.decode_watermarked(z, m);
            io::write_png(gen_out, xw.values);
            std::vector<std::string> outputs{gen_out};
            if (!gen_clean_out.empty()) {
                io::write_png(gen_clean_out, ae.decode(z).values);
                outputs.push_back(gen_clean_out);
            }
            write_manifest(c_gen, cfg, "generate",
                           {{"autoencoder", ae.weights_checksum()}, {"embedder", stack.weights_checksum()}},
                           outputs);
            std::cout << "message " << m.to_hex() << "\nwrote " << gen_out << "\n";
        } else if (app.got_subcommand(cmd_emb)) {
            const auto cfg = c_emb.config();
            fs::create_directories(c_emb.run_dir);
            auto ae = ae::Autoencoder::load_file(emb_ae);
            auto stack = embedder::EmbedderStack::load_file(emb_stack, ae);
            ImageGrid cover(io::read_png(emb_in), ImageSource::cover);
            BitMessage m = BitMessage::from_hex(emb_msg, stack.k());
            if (emb_out.empty()) emb_out = c_emb.run_dir + "/watermarked.png";
            io::write_png(emb_out, stack.watermark_cover_image(cover, m).values);
            write_manifest(c_emb, cfg, "embed",
                           {{"autoencoder", ae.weights_checksum()}, {"embedder", stack.weights_checksum()}},
                           {emb_out});
            std::cout << "wrote " << emb_out << "\n";
        } else if (app.got_subcommand(cmd_ext)) {
            const auto cfg = c_ext.config();
            fs::create_directories(c_ext.run_dir);
            auto ext = extractor::Extractor::load_file(ext_ckpt);
            ImageGrid img(io::read_png(ext_in), ImageSource::attacked);
            const BitMessage m = ext.extract_message(img);
            std::ofstream f(c_ext.run_dir + "/extracted.txt");
            f << m.to_hex() << "\n";
            write_manifest(c_ext, cfg, "extract", {}, {c_ext.run_dir + "/extracted.txt"});
            std::cout << m.to_hex() << "\n";
        } else if (app.got_subcommand(cmd_det)) {
            const auto cfg = c_det.config();
            fs::create_directories(c_det.run_dir);
            auto ext = extractor::Extractor::load_file(det_ckpt);
            ImageGrid img(io::read_png(det_in), ImageSource::attacked);
            const BitMessage ref = BitMessage::from_hex(det_msg, ext.k());
            const int n = det_n >= 0 ? det_n : matching::solve_threshold(det_fpr, 1, ext.k());
            const auto rep = matching::detect(ext.extract_message(img), ref, n);
            std::ofstream f(c_det.run_dir + "/report.txt");
            f << rep.to_line() << "\n";
            write_manifest(c_det, cfg, "detect", {}, {c_det.run_dir + "/report.txt"});
            std::cout << rep.to_line() << "\n";
        } else if (app.got_subcommand(cmd_att)) {
            const auto cfg = c_att.config();
            fs::create_directories(c_att.run_dir);
            auto ext = extractor::Extractor::load_file(att_ckpt);
            auto reg = matching::UserRegistry::load(att_reg, ext.k());
            ImageGrid img(io::read_png(att_in), ImageSource::attacked);
            const int n = att_n >= 0 ? att_n : matching::solve_threshold(att_fpr, reg.size(), ext.k());
            const auto rep = matching::attribute(ext.extract_message(img), reg, n);
            std::ofstream f(c_att.run_dir + "/report.txt");
            f << rep.to_line() << "\n";
            write_manifest(c_att, cfg, "attribute", {}, {c_att.run_dir + "/report.txt"});
            std::cout << rep.to_line() << "\n";
        } else if (app.got_subcommand(cmd_atk)) {
            const auto cfg = c_atk.config();
            fs::create_directories(c_atk.run_dir);
            ImageGrid img(io::read_png(atk_in), ImageSource::cover);
            if (atk_out.empty()) atk_out = c_atk.run_dir + "/attacked.png";
            attacks::AttackSpec spec{attacks::kind_from_name(atk_kind), atk_param, atk_seed};
            ImageGrid out = spec.kind == attacks::AttackKind::reencode
                                ? attacks::reencode_attack(ae::Autoencoder::load_file(atk_ae), img)
                                : attacks::apply_attack(spec, img);
            io::write_png(atk_out, out.values);
            write_manifest(c_atk, cfg, "attack", {}, {atk_out});
            std::cout << "wrote " << atk_out << "\n";
        } else if (app.got_subcommand(cmd_ev)) {
            const auto cfg = c_ev.config();
            fs::create_directories(c_ev.run_dir);
            auto ae = ae::Autoencoder::load_file(ev_ae);
            auto stack = embedder::EmbedderStack::load_file(ev_emb, ae);
            auto ext = extractor::Extractor::load_file(ev_ext);
            auto corpus = make_corpus(cfg);
            auto presets = ev_presets.empty() ? attacks::default_attack_presets()
                                              : attacks::parse_attack_presets(ev_presets);
            trainer::PerceptualLoss ploss(cfg.perceptual_weights);
            evalx::EvalOptions eopt;
            eopt.num_images = ev_images;
            eopt.messages_per_image = ev_msgs;
            eopt.seed = cfg.seed;
            eopt.post_generation = ev_postgen;
            std::optional<ae::Autoencoder> reenc;
            if (!ev_reenc.empty()) {
                reenc = ae::Autoencoder::load_file(ev_reenc);
                eopt.reencode_ae = &*reenc;
            }
            const auto table = evalx::evaluate(ae, stack, ext, corpus, presets, ploss, eopt);
            table.write_tsv(c_ev.run_dir + "/eval_table.tsv");
            write_manifest(c_ev, cfg, "eval",
                           {{"autoencoder", ae.weights_checksum()}, {"embedder", stack.weights_checksum()}},
                           {c_ev.run_dir + "/eval_table.tsv"});
            std::cout << table.to_tsv();
        } else if (app.got_subcommand(cmd_fpr)) {
            const auto cfg = c_fpr.config();
            fs::create_directories(c_fpr.run_dir);
            if (fpr_nmax < 0) fpr_nmax = fpr_k;
            check(fpr_nmin >= 0 && fpr_nmax <= fpr_k && fpr_nmin <= fpr_nmax,
                  "fpr-table: need 0 <= n-min <= n-max <= k");
            std::ostringstream os;
            os << "n\tfpr_det" << (fpr_users > 0 ? "\tfpr_att\n" : "\n");
            os.precision(12);
            for (int n = fpr_nmin; n <= fpr_nmax; ++n) {
                os << n << "\t" << matching::fpr_detection(n, fpr_k);
                if (fpr_users > 0) os << "\t" << matching::fpr_attribution(fpr_users, n, fpr_k);
                os << "\n";
            }
            std::ofstream f(c_fpr.run_dir + "/fpr_table.tsv");
            f << os.str();
            write_manifest(c_fpr, cfg, "fpr-table", {}, {c_fpr.run_dir + "/fpr_table.tsv"});
            std::cout << os.str();
        } else if (app.got_subcommand(cmd_sim)) {
            const auto cfg = c_sim.config();
            fs::create_directories(c_sim.run_dir);
            const auto rep = matching::simulate_attribution(sim_users, sim_ipu, sim_p, sim_target, sim_k,
                                                            cfg.seed);
            std::ostringstream os;
            os << "users " << sim_users << " images " << rep.total_images << " threshold " << rep.threshold
               << " accuracy " << rep.accuracy << " true_positives " << rep.true_positives
               << " false_attributions " << rep.false_attributions << "\n";
            std::ofstream f(c_sim.run_dir + "/simulation.txt");
            f << os.str();
            write_manifest(c_sim, cfg, "simulate-attribution", {}, {c_sim.run_dir + "/simulation.txt"});
            std::cout << os.str();
        } else if (app.got_subcommand(cmd_plot)) {
            const auto cfg = c_plot.config();
            fs::create_directories(c_plot.run_dir);
            if (plot_out.empty()) plot_out = c_plot.run_dir + "/plot.svg";
            const int selected = (!plot_metrics.empty()) + (!plot_eval.empty()) + (plot_fpr_k > 0);
            check(selected == 1, "plot: pass exactly one of --metrics, --eval, --fpr-k");
            if (!plot_metrics.empty()) evalx::plot_metrics_log(plot_metrics, plot_out);
            else if (!plot_eval.empty()) evalx::plot_eval_table(plot_eval, plot_out);
            else evalx::plot_fpr_curve(plot_fpr_k, plot_out);
            write_manifest(c_plot, cfg, "plot", {}, {plot_out});
            std::cout << "wrote " << plot_out << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

}  // namespace latentmark::cli
