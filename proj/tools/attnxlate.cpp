// attnxlate: synthetic data generation, two-domain training, inference and
// KID evaluation for attention-guided image translation.

#include "attnx/eval.hpp"
#include "attnx/trainer.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace attnx;

int env_thread_cap() {
    const char* v = std::getenv("ATTNXLATE_THREADS");
    if (!v) return 1;
    const int n = std::atoi(v);
    if (n < 1) throw std::invalid_argument("ATTNXLATE_THREADS must be a positive integer");
    return n;
}

json read_json_file(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    return json::parse(f);
}

void write_json_file(const fs::path& p, const json& j) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << j.dump(2) << "\n";
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir) {
    synthetic_spec spec;
    if (!spec_path.empty()) spec = read_json_file(spec_path).get<synthetic_spec>();
    spec.validate();
    const synthetic_bundle data = generate_synthetic(spec);
    fs::create_directories(out_dir);
    write_dataset(out_dir, data);
    write_json_file(fs::path(out_dir) / "synthetic_spec.json", spec);
    std::cout << "wrote " << data.train_s.size() << "+" << data.train_t.size() << " train and "
              << data.test_s.size() << "+" << data.test_t.size() << " test images to " << out_dir
              << "\n";
    return 0;
}

struct cli_overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs, switch_epoch;
    std::optional<double> tau, lambda_cyc, width_mult;
    std::string ablation;
};

train_config make_config(const std::string& config_path, const cli_overrides& ov,
                         const std::string& out_dir) {
    train_config cfg;
    if (!config_path.empty()) cfg = read_json_file(config_path).get<train_config>();
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.epochs) cfg.epochs = *ov.epochs;
    if (ov.switch_epoch) cfg.switch_epoch = *ov.switch_epoch;
    if (ov.tau) cfg.tau = *ov.tau;
    if (ov.lambda_cyc) cfg.lambda_cyc = *ov.lambda_cyc;
    if (ov.width_mult) cfg.width_multiplier = *ov.width_mult;
    if (!ov.ablation.empty()) cfg.ablation = ablation_from_name(ov.ablation);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg.validate();
    return cfg;
}

int cmd_train(const std::string& config_path, const std::string& dataset_dir,
              const std::string& out_dir, const std::string& resume, const cli_overrides& ov) {
    train_config cfg = make_config(config_path, ov, out_dir);
    if (cfg.out_dir.empty()) throw std::runtime_error("train requires an output directory");
    fs::create_directories(cfg.out_dir);
    write_json_file(fs::path(cfg.out_dir) / "config.json", cfg);  // provenance echo

    const dataset_bundle data = load_dataset(dataset_dir);
    train_state st = resume.empty() ? init_train_state(cfg) : load_train_checkpoint(resume);
    if (!resume.empty()) {
        st.cfg.epochs = cfg.epochs;  // allow extending a resumed run
        st.cfg.out_dir = cfg.out_dir;
    }
    train(st, data.train_s, data.train_t);
    std::cout << "trained to epoch " << st.epoch << "; checkpoints in " << cfg.out_dir << "\n";
    return 0;
}

tensor<float> grayscale_to_rgb_signed(const tensor<float>& map) {
    tensor<float> out(shape_t{1, 3, map.dim(2), map.dim(3)});
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < map.numel(); ++i)
            out.data()[c * map.numel() + i] = map.data()[i] * 2.0f - 1.0f;
    return out;
}

int cmd_translate(const std::string& ckpt_path, const std::string& input_dir,
                  const std::string& out_dir, const std::string& direction) {
    train_state st = load_train_checkpoint(ckpt_path);
    const network<float>& gen = direction == "ts" ? st.g_ts : st.g_st;
    const network<float>& att = direction == "ts" ? st.a_t : st.a_s;

    const dataset ds = load_dataset_dir(input_dir);
    fs::create_directories(out_dir);

    const int H = ds.images[0].dim(2), W = ds.images[0].dim(3);
    const int n = static_cast<int>(ds.size());
    tensor<float> grid(shape_t{1, 3, H * n, W * 3});  // rows per sample: input|attention|composed
    auto blit = [&](const tensor<float>& img, int row, int col) {
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < H; ++i)
                for (int j = 0; j < W; ++j)
                    grid.at(0, c, row * H + i, col * W + j) = img.at(0, c, i, j);
    };

    char name[64];
    for (int i = 0; i < n; ++i) {
        const translation_output<float> out = translate_inference(gen, att, ds.images[i]);
        std::snprintf(name, sizeof(name), "%04d_input.png", i);
        save_image(fs::path(out_dir) / name, ds.images[i]);
        std::snprintf(name, sizeof(name), "%04d_attention.png", i);
        save_attention_map(fs::path(out_dir) / name, out.attention);
        std::snprintf(name, sizeof(name), "%04d_composed.png", i);
        save_image(fs::path(out_dir) / name, out.composed);
        blit(ds.images[i], i, 0);
        blit(grayscale_to_rgb_signed(out.attention), i, 1);
        blit(out.composed, i, 2);
    }
    save_image(fs::path(out_dir) / "grid.png", grid);
    std::cout << "translated " << n << " images into " << out_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& dataset_dir,
                 const std::string& report_path, std::uint64_t eval_seed, int n_splits,
                 int split_size) {
    train_state st = load_train_checkpoint(ckpt_path);
    const dataset_bundle data = load_dataset(dataset_dir);

    std::vector<tensor<float>> fakes;
    std::vector<translation_output<float>> outputs;
    for (const auto& img : data.test_s.images) {
        outputs.push_back(translate_inference(st.g_st, st.a_s, img));
        fakes.push_back(outputs.back().composed);
    }

    const feature_extractor fx = feature_extractor::make(eval_seed);
    const kid_report_t vs_target =
        kid_report(data.test_t.images, fakes, fx, n_splits, split_size, eval_seed);
    const kid_report_t vs_source =
        kid_report(data.test_s.images, fakes, fx, n_splits, split_size, eval_seed + 1);
    if (vs_target.clamped || vs_source.clamped)
        std::cerr << "warning: split size clamped to " << vs_target.split_size
                  << " (pools smaller than requested)\n";

    json report;
    report["kid_vs_target"] = {{"mean", vs_target.mean}, {"std", vs_target.std_dev},
                               {"n_splits", vs_target.n_splits},
                               {"split_size", vs_target.split_size},
                               {"kernel", vs_target.kernel}};
    report["kid_vs_source"] = {{"mean", vs_source.mean}, {"std", vs_source.std_dev},
                               {"n_splits", vs_source.n_splits},
                               {"split_size", vs_source.split_size},
                               {"kernel", vs_source.kernel}};
    report["mean_kid"] = 0.5 * (vs_target.mean + vs_source.mean);
    report["config"] = st.cfg;
    report["eval_seed"] = eval_seed;

    if (data.test_s.has_masks()) {
        double iou = 0, contrast = 0, bg_l1 = 0;
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            const mask_metrics_t m = mask_metrics(outputs[i], data.test_s.images[i],
                                                  data.test_s.masks[i],
                                                  static_cast<float>(st.cfg.tau));
            iou += m.iou;
            contrast += m.attention_contrast;
            bg_l1 += m.background_l1;
        }
        const double k = static_cast<double>(outputs.size());
        report["mask_metrics"] = {{"iou", iou / k},
                                  {"attention_contrast", contrast / k},
                                  {"background_l1", bg_l1 / k}};
    }

    write_json_file(report_path, report);
    std::cout << "mean KID " << report["mean_kid"] << " (vs target " << vs_target.mean
              << ", vs source " << vs_source.mean << "); report at " << report_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention-guided unsupervised image-to-image translation"};
    app.require_subcommand(1);

    std::string spec_path, out_dir, config_path, dataset_dir, ckpt_path, input_dir, report_path;
    std::string resume, direction = "st";
    cli_overrides ov;
    std::uint64_t eval_seed = 0;
    int n_splits = 10, split_size = 50;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic two-domain dataset");
    gen->add_option("--spec", spec_path, "synthetic spec JSON (defaults used when omitted)");
    gen->add_option("--out", out_dir, "output dataset directory")->required();

    auto* tr = app.add_subcommand("train", "train translation networks");
    tr->add_option("--config", config_path, "training config JSON");
    tr->add_option("--data", dataset_dir, "dataset directory (trainA/trainB/...)")->required();
    tr->add_option("--out", out_dir, "output directory for checkpoints and metrics")->required();
    tr->add_option("--resume", resume, "checkpoint to resume from");
    tr->add_option("--seed", ov.seed, "training seed");
    tr->add_option("--epochs", ov.epochs, "total epochs K");
    tr->add_option("--switch-epoch", ov.switch_epoch, "stage-switch epoch");
    tr->add_option("--tau", ov.tau, "attention threshold");
    tr->add_option("--lambda-cyc", ov.lambda_cyc, "cycle-consistency weight");
    tr->add_option("--width-mult", ov.width_mult, "network width multiplier");
    tr->add_option("--ablation", ov.ablation,
                   "ours|ours-cycle|ours-cycleatt|ours-as|ours-at|ours-d|ours-d-a");

    auto* tl = app.add_subcommand("translate", "run inference and export image triplets");
    tl->add_option("--checkpoint", ckpt_path, "training checkpoint")->required();
    tl->add_option("--input", input_dir, "directory of input PNGs")->required();
    tl->add_option("--out", out_dir, "output directory")->required();
    tl->add_option("--direction", direction, "st (default) or ts");

    auto* ev = app.add_subcommand("evaluate", "KID + mask-metric evaluation");
    ev->add_option("--checkpoint", ckpt_path, "training checkpoint")->required();
    ev->add_option("--data", dataset_dir, "dataset directory")->required();
    ev->add_option("--report", report_path, "output JSON report path")->required();
    ev->add_option("--eval-seed", eval_seed, "evaluation seed");
    ev->add_option("--splits", n_splits, "number of KID splits");
    ev->add_option("--split-size", split_size, "KID split size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;  // usage errors exit 1
    }

    try {
        (void)env_thread_cap();  // validated cap on internal parallelism
        if (gen->parsed()) return cmd_gen_data(spec_path, out_dir);
        if (tr->parsed()) return cmd_train(config_path, dataset_dir, out_dir, resume, ov);
        if (tl->parsed()) return cmd_translate(ckpt_path, input_dir, out_dir, direction);
        if (ev->parsed())
            return cmd_evaluate(ckpt_path, dataset_dir, report_path, eval_seed, n_splits,
                                split_size);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
