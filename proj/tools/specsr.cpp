// specsr — batch CLI for spectral reconstruction: dataset preparation,
// training, evaluation, and gradient self-verification.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "specsr/data_pipeline.hpp"
#include "specsr/gradcheck.hpp"
#include "specsr/hypercube.hpp"
#include "specsr/inference.hpp"
#include "specsr/metrics.hpp"
#include "specsr/model.hpp"
#include "specsr/optimizer.hpp"
#include "specsr/rng.hpp"

#ifndef SPECSR_GIT_REV
#define SPECSR_GIT_REV "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specsr;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonArgs {
    int threads = 0;
};

void apply_threads(const CommonArgs& common) {
#ifdef _OPENMP
    if (common.threads > 0) omp_set_num_threads(common.threads);
#endif
}

SpectralResponse resolve_response(const std::string& spec) {
    if (spec.empty() || spec == "cie1964") return cie1964_observer();
    return load_response_csv(spec);
}

std::vector<fs::path> list_cubes(const std::string& data_dir) {
    if (!fs::is_directory(data_dir))
        throw ConfigError("not a directory: " + data_dir);
    std::vector<fs::path> cubes;
    for (const auto& entry : fs::directory_iterator(data_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".hscb")
            cubes.push_back(entry.path());
    std::sort(cubes.begin(), cubes.end());
    if (cubes.empty()) throw ConfigError("no .hscb cubes in " + data_dir);
    return cubes;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    int argc, char** argv) {
    json manifest;
    manifest["command"] = command;
    manifest["revision"] = SPECSR_GIT_REV;
    manifest["config"] = config;
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    manifest["argv"] = args;
    fs::create_directories(dir);
    std::ofstream f(dir / "manifest.json", std::ios::trunc);
    if (!f) throw IoError("cannot write manifest in " + dir.string());
    f << manifest.dump(2) << "\n";
}

// --------------------------------------------------------------------------

struct SynthArgs {
    std::string data_dir;
    std::string out_dir;
    std::string response = "cie1964";
};

int cmd_synth_rgb(const SynthArgs& args) {
    const SpectralResponse resp = resolve_response(args.response);
    const fs::path out_dir = args.out_dir.empty() ? fs::path(args.data_dir)
                                                  : fs::path(args.out_dir);
    fs::create_directories(out_dir);
    for (const fs::path& path : list_cubes(args.data_dir)) {
        const HyperCube cube = load_cube(path.string());
        const Tensor4<float> rgb = synthesize_rgb(cube, resp);
        const std::string stem = path.stem().string();
        save_pfm(rgb, (out_dir / (stem + ".rgb.pfm")).string());
        save_ppm(rgb, (out_dir / (stem + ".rgb.ppm")).string());
        std::cout << stem << ": " << cube.h << "x" << cube.w << "x" << cube.bands()
                  << " -> rgb written\n";
    }
    return 0;
}

// --------------------------------------------------------------------------

struct FoldArgs {
    std::string data_dir;
    std::string out;
    std::uint64_t seed = 0;
};

int cmd_make_folds(const FoldArgs& args) {
    std::vector<std::string> names;
    for (const fs::path& p : list_cubes(args.data_dir)) names.push_back(p.stem().string());
    FoldSplit split = make_folds(names, args.seed);
    save_split(split, args.out);
    std::cout << "wrote " << split.entries.size() << " assignments to " << args.out << "\n";
    return 0;
}

// --------------------------------------------------------------------------

struct DemoArgs {
    std::string out_dir;
    int images = 4;
    int size = 64;
    std::uint64_t seed = 0;
};

/// Synthetic cubes with smooth spatial structure and smooth spectra, enough
/// to exercise the full pipeline without a real dataset.
HyperCube demo_cube(std::mt19937_64& rng, int size) {
    HyperCube cube(size, size, standard_wavelengths());
    const int blobs = 6;
    std::vector<double> cy(blobs), cx(blobs), sigma(blobs), peak_band(blobs), amp(blobs);
    for (int b = 0; b < blobs; ++b) {
        cy[b] = uniform01(rng) * size;
        cx[b] = uniform01(rng) * size;
        sigma[b] = size * (0.08 + 0.2 * uniform01(rng));
        peak_band[b] = uniform01(rng) * 30.0;
        amp[b] = 0.3 + 0.7 * uniform01(rng);
    }
    for (int band = 0; band < cube.bands(); ++band) {
        float* plane = cube.plane(band);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double v = 0.05;
                for (int b = 0; b < blobs; ++b) {
                    const double dy = (y - cy[b]) / sigma[b];
                    const double dx = (x - cx[b]) / sigma[b];
                    const double db = (band - peak_band[b]) / 8.0;
                    v += amp[b] * std::exp(-0.5 * (dy * dy + dx * dx + db * db));
                }
                plane[static_cast<std::size_t>(y) * size + x] = static_cast<float>(v);
            }
    }
    return cube;
}

int cmd_make_demo(const DemoArgs& args) {
    if (args.images < 1 || args.size < 36)
        throw ConfigError("make-demo: need at least 1 image of size >= 36");
    fs::create_directories(args.out_dir);
    std::mt19937_64 rng(args.seed);
    for (int i = 0; i < args.images; ++i) {
        HyperCube cube = demo_cube(rng, args.size);
        char name[32];
        std::snprintf(name, sizeof(name), "demo_%02d.hscb", i);
        save_cube(cube, (fs::path(args.out_dir) / name).string());
        std::cout << "wrote " << name << "\n";
    }
    return 0;
}

// --------------------------------------------------------------------------

struct TrainArgs {
    CommonArgs common;
    std::string data_dir;
    std::string run_dir;
    std::string split_path;
    int fold = 0;
    std::string mode = "two-fold";
    std::string response = "cie1964";
    TrainConfig train;
    ModelConfig model;
    bool patch_in_given = false;
    int stride = 20;
    std::string resume;
    long start_iter = -1;
    long log_every = 100;
    long ckpt_every = 10000;
};

long iter_from_checkpoint_name(const std::string& path) {
    const std::string stem = fs::path(path).stem().string();
    const auto digits = stem.find_last_not_of("0123456789");
    if (digits == std::string::npos || digits + 1 >= stem.size()) return -1;
    return std::stol(stem.substr(digits + 1));
}

int cmd_train(TrainArgs& args, int argc, char** argv) {
    apply_threads(args.common);
    args.model.validate();
    const int rf = receptive_field(args.model);
    if (!args.patch_in_given) args.train.patch_in = args.train.patch_out + rf - 1;
    args.train.validate(args.model);

    const SpectralResponse resp = resolve_response(args.response);
    std::vector<fs::path> cubes = list_cubes(args.data_dir);

    FoldSplit split;
    if (!args.split_path.empty()) {
        split = load_split(args.split_path);
    } else {
        std::vector<std::string> names;
        for (const auto& p : cubes) names.push_back(p.stem().string());
        split = make_folds(names, args.train.seed);
        std::cout << "no --split given: derived a seeded two-fold split\n";
    }

    std::vector<PatchPair> pool;
    int used = 0;
    for (const fs::path& path : cubes) {
        const std::string name = path.stem().string();
        if (split.fold_of(name) != args.fold) continue;
        const HyperCube cube = load_cube(path.string());
        const Tensor4<float> rgb = synthesize_rgb(cube, resp);
        append_patch_pool(rgb, cube_to_tensor(cube), args.train.patch_in, args.train.patch_out,
                          args.stride, pool);
        ++used;
    }
    std::cout << "fold " << args.fold << ": " << used << " images -> " << pool.size()
              << " training patches\n";

    ModelParams<float> params;
    TrainOptions options;
    options.run_dir = args.run_dir;
    options.log_every = args.log_every;
    options.checkpoint_every = args.ckpt_every;
    if (!args.resume.empty()) {
        params = load_checkpoint(args.resume);
        if (params.config != args.model)
            throw ConfigError("resume checkpoint config does not match the requested model");
        options.start_iter =
            args.start_iter >= 0 ? args.start_iter : iter_from_checkpoint_name(args.resume);
        if (options.start_iter < 0)
            throw ConfigError("cannot derive the resume iteration from '" + args.resume +
                              "'; pass --start-iter");
        std::cout << "resuming from " << args.resume << " at iteration " << options.start_iter
                  << "\n";
    } else {
        params = init_params<float>(args.model, args.train.seed);
    }

    json config{{"data_dir", args.data_dir},
                {"run_dir", args.run_dir},
                {"split", args.split_path},
                {"fold", args.fold},
                {"response", args.response},
                {"stride", args.stride},
                {"resume", args.resume},
                {"start_iter", options.start_iter},
                {"model",
                 {{"res_blocks", args.model.n_res_blocks},
                  {"features", args.model.n_features},
                  {"bottleneck", args.model.n_bottleneck},
                  {"out_channels", args.model.out_channels}}},
                {"train",
                 {{"lr0", args.train.lr0},
                  {"decay_factor", args.train.decay_factor},
                  {"decay_every", args.train.decay_every},
                  {"total_iters", args.train.total_iters},
                  {"batch_size", args.train.batch_size},
                  {"patch_in", args.train.patch_in},
                  {"patch_out", args.train.patch_out},
                  {"seed", args.train.seed}}}};
    write_manifest(args.run_dir, "train", config, argc, argv);

    options.on_log = [](const LossRecord& rec) {
        std::printf("iter %8ld  lr %.6g  loss %.6g\n", rec.iter, rec.lr, rec.loss);
    };
    train(std::move(params), args.train, pool, options);
    std::cout << "done; checkpoints in " << (fs::path(args.run_dir) / "checkpoints").string()
              << "\n";
    return 0;
}

// --------------------------------------------------------------------------

struct EvalArgs {
    CommonArgs common;
    std::string data_dir;
    std::string split_path;
    std::string mode = "two-fold";
    std::vector<std::string> checkpoints;
    std::string out_dir;
    std::string response = "cie1964";
    bool enhanced = false;
    bool per_band = false;
    int tile = 0;
};

int cmd_eval(const EvalArgs& args, int argc, char** argv) {
    apply_threads(args.common);
    if (args.checkpoints.empty()) throw ConfigError("eval: at least one --checkpoint required");
    const SplitMode mode =
        args.mode == "provided" ? SplitMode::Provided : SplitMode::TwoFold;

    std::vector<ModelParams<float>> models;
    for (const std::string& path : args.checkpoints) models.push_back(load_checkpoint(path));

    const SpectralResponse resp = resolve_response(args.response);
    FoldSplit split = load_split(args.split_path);

    std::vector<EvalItem> items;
    for (const fs::path& path : list_cubes(args.data_dir)) {
        EvalItem item;
        item.name = path.stem().string();
        item.gt = load_cube(path.string());
        item.rgb = synthesize_rgb(item.gt, resp);
        items.push_back(std::move(item));
    }

    reset_predict_call_count();
    MetricReport report =
        evaluate_dataset(models, split, items, mode, args.enhanced, args.tile);
    print_report(report, std::cout);
    std::cout << "forward passes: " << predict_call_count() << "\n";

    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        json config{{"data_dir", args.data_dir}, {"split", args.split_path},
                    {"mode", args.mode},         {"checkpoints", args.checkpoints},
                    {"response", args.response}, {"enhanced", args.enhanced},
                    {"tile", args.tile}};
        write_manifest(args.out_dir, "eval", config, argc, argv);
        const std::string suffix = args.enhanced ? "_enhanced" : "";
        write_report_csv(report, (fs::path(args.out_dir) / ("metrics" + suffix + ".csv")).string());
        if (args.per_band)
            write_per_band_csv(report,
                               (fs::path(args.out_dir) / ("per_band" + suffix + ".csv")).string());
        std::cout << "report written to " << args.out_dir << "\n";
    }
    return 0;
}

// --------------------------------------------------------------------------

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::string inject_fault;
};

int cmd_gradcheck(const GradcheckArgs& args) {
    GradCheckOptions opt;
    opt.seed = args.seed;
    opt.inject_fault = args.inject_fault;
    GradCheckReport report = run_gradcheck(opt);
    for (const auto& op : report.ops)
        std::printf("%-24s %-4s max_rel_err %.3e  (%ld probes)\n", op.op.c_str(),
                    op.pass ? "ok" : "FAIL", op.max_rel_err, op.checked);
    if (!report.all_pass) {
        std::cerr << "gradient check failed\n";
        return kExitRuntime;
    }
    std::cout << "all gradient checks passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral reconstruction from RGB: train, infer, evaluate"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth-rgb", "project cubes to RGB images");
    synth_cmd->add_option("--data-dir", synth.data_dir, "directory of .hscb cubes")->required();
    synth_cmd->add_option("--out-dir", synth.out_dir, "output directory (default: data dir)");
    synth_cmd->add_option("--response", synth.response,
                          "'cie1964' or a camera response CSV path");

    FoldArgs folds;
    auto* folds_cmd = app.add_subcommand("make-folds", "write a two-fold split file");
    folds_cmd->add_option("--data-dir", folds.data_dir, "directory of .hscb cubes")->required();
    folds_cmd->add_option("--out", folds.out, "split file to write")->required();
    folds_cmd->add_option("--seed", folds.seed, "shuffle seed");

    DemoArgs demo;
    auto* demo_cmd = app.add_subcommand("make-demo", "generate a synthetic demo dataset");
    demo_cmd->add_option("--out-dir", demo.out_dir, "output directory")->required();
    demo_cmd->add_option("--images", demo.images, "number of cubes");
    demo_cmd->add_option("--size", demo.size, "cube side in pixels");
    demo_cmd->add_option("--seed", demo.seed, "generator seed");

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model on one fold");
    train_cmd->add_option("--data-dir", train_args.data_dir, "directory of .hscb cubes")
        ->required();
    train_cmd->add_option("--run-dir", train_args.run_dir, "run directory")->required();
    train_cmd->add_option("--split", train_args.split_path, "split file (name,fold lines)");
    train_cmd->add_option("--fold", train_args.fold, "fold whose images form the training set");
    train_cmd->add_option("--response", train_args.response,
                          "'cie1964' or a camera response CSV path");
    train_cmd->add_option("--lr", train_args.train.lr0, "initial learning rate");
    train_cmd->add_option("--decay-factor", train_args.train.decay_factor, "lr decay factor");
    train_cmd->add_option("--decay-every", train_args.train.decay_every,
                          "iterations between decays");
    train_cmd->add_option("--iters", train_args.train.total_iters, "total iterations");
    train_cmd->add_option("--batch", train_args.train.batch_size, "batch size");
    train_cmd->add_option("--patch-out", train_args.train.patch_out,
                          "label patch size (input derived from the receptive field)");
    train_cmd->add_option("--patch-in", train_args.train.patch_in, "input patch size")
        ->each([&train_args](const std::string&) { train_args.patch_in_given = true; });
    train_cmd->add_option("--stride", train_args.stride, "patch grid stride");
    train_cmd->add_option("--seed", train_args.train.seed, "training seed");
    train_cmd->add_option("--res-blocks", train_args.model.n_res_blocks, "residual blocks");
    train_cmd->add_option("--features", train_args.model.n_features, "feature maps");
    train_cmd->add_option("--bottleneck", train_args.model.n_bottleneck, "bottleneck maps");
    train_cmd->add_option("--out-channels", train_args.model.out_channels, "output bands");
    train_cmd->add_option("--resume", train_args.resume, "checkpoint to resume from");
    train_cmd->add_option("--start-iter", train_args.start_iter,
                          "resume iteration (default: from the checkpoint name)");
    train_cmd->add_option("--log-every", train_args.log_every, "loss log interval");
    train_cmd->add_option("--ckpt-every", train_args.ckpt_every, "checkpoint interval");
    train_cmd->add_option("--threads", train_args.common.threads, "OpenMP threads");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on held-out images");
    eval_cmd->add_option("--data-dir", eval_args.data_dir, "directory of .hscb cubes")
        ->required();
    eval_cmd->add_option("--split", eval_args.split_path, "split file")->required();
    eval_cmd->add_option("--mode", eval_args.mode, "two-fold | provided");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoints,
                         "checkpoint per fold, in fold order (repeatable)");
    eval_cmd->add_option("--out-dir", eval_args.out_dir, "report directory");
    eval_cmd->add_option("--response", eval_args.response,
                         "'cie1964' or a camera response CSV path");
    eval_cmd->add_flag("--enhanced", eval_args.enhanced,
                       "average the 8 dihedral-transform predictions");
    eval_cmd->add_flag("--per-band", eval_args.per_band, "also write per-band RMSE");
    eval_cmd->add_option("--tile", eval_args.tile, "tile size (0 = whole image)");
    eval_cmd->add_option("--threads", eval_args.common.threads, "OpenMP threads");

    GradcheckArgs grad_args;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference self-verification");
    grad_cmd->add_option("--seed", grad_args.seed, "probe seed");
    grad_cmd->add_option("--inject-fault", grad_args.inject_fault,
                         "perturb the named op's gradient (test hook)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) return cmd_synth_rgb(synth);
        if (*folds_cmd) return cmd_make_folds(folds);
        if (*demo_cmd) return cmd_make_demo(demo);
        if (*train_cmd) return cmd_train(train_args, argc, argv);
        if (*eval_cmd) return cmd_eval(eval_args, argc, argv);
        if (*grad_cmd) return cmd_gradcheck(grad_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
