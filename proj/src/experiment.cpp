#include "lpnuq/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lpnuq/metrics.hpp"
#include "lpnuq/pgm.hpp"

namespace fs = std::filesystem;

namespace lpnuq {

namespace {

// Shortest decimal form that round-trips the exact double, so regenerated
// CSVs are byte-identical and aggregates can be recomputed losslessly.
std::string fmt(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw std::runtime_error("cannot open " + tmp);
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f)
            throw std::runtime_error("write failed for " + tmp);
    }
    fs::rename(tmp, path);
}

ProxFn make_prox(const PriorModel& model)
{
    return [&model](const Vec& v) { return prox_apply(model, v); };
}

std::string unit_name(int digit, int image, int n_views,
                      const std::string& method)
{
    return "d" + std::to_string(digit) + "_i" + std::to_string(image) + "_v"
        + std::to_string(n_views) + "_" + method;
}

} // namespace

std::uint64_t cell_seed(std::uint64_t base, int digit, int image, int n_views)
{
    return ((base * 10 + static_cast<std::uint64_t>(digit)) * 100
            + static_cast<std::uint64_t>(image))
        * 1000
        + static_cast<std::uint64_t>(n_views);
}

ExperimentConfig make_experiment_config(const Config& c)
{
    ExperimentConfig e;

    ScanGeometry g;
    g.image_side = c.get_int("image_side", g.image_side);
    g.detector_bins = c.get_int("detector_bins", g.detector_bins);
    g.source_to_center = c.get_double("source_to_center", g.source_to_center);
    g.center_to_detector =
        c.get_double("center_to_detector", g.center_to_detector);
    g.detector_spacing = c.get_double("detector_spacing", g.detector_spacing);
    g.candidate_angles = c.get_int("candidate_angles", g.candidate_angles);
    e.geometry = make_geometry(g);

    e.budgets = c.get_int_list("budgets", e.budgets);
    e.n_views = c.get_int("n_views", e.budgets.front());
    e.n_seeds = c.get_int("n_seeds", e.n_seeds);
    e.sigma = c.get_double("sigma", e.sigma);
    e.base_seed = c.get_u64("base_seed", e.base_seed);

    const std::string mode = c.get_string("resample_mode", "fresh_acquisition");
    if (mode == "fresh_acquisition")
        e.resample_mode = ResampleMode::FreshAcquisition;
    else if (mode == "fixed_pool_subsets")
        e.resample_mode = ResampleMode::FixedPoolSubsets;
    else
        throw std::runtime_error(
            "config: resample_mode must be fresh_acquisition or fixed_pool_subsets");

    e.solver.max_iters = c.get_int("solver_max_iters", e.solver.max_iters);
    e.solver.step_scale = c.get_double("solver_step_scale", e.solver.step_scale);
    e.solver.tau = c.get_double("solver_tau", e.solver.tau);
    const std::string init = c.get_string("solver_init", "fbp");
    if (init == "fbp")
        e.solver.init = InitMode::Fbp;
    else if (init == "zeros")
        e.solver.init = InitMode::Zeros;
    else
        throw std::runtime_error("config: solver_init must be fbp or zeros");
    e.solver.clamp_iterates = c.get_bool("solver_clamp", e.solver.clamp_iterates);
    e.solver.reg_weight =
        c.get_double("solver_reg_weight", e.solver.reg_weight);

    e.fbp.cutoff = c.get_double("fbp_cutoff", e.fbp.cutoff);
    e.fbp.fan_weighting = c.get_bool("fbp_fan_weighting", e.fbp.fan_weighting);

    e.train_digit = c.get_int("train_digit", e.train_digit);
    e.eval_per_digit = c.get_int("eval_per_digit", e.eval_per_digit);
    e.split_seed = c.get_u64("split_seed", e.split_seed);

    e.training.epochs = c.get_int("train_epochs", e.training.epochs);
    e.training.batch_size = c.get_int("train_batch_size", e.training.batch_size);
    e.training.learning_rate = c.get_double("train_lr", e.training.learning_rate);
    e.training.adam_beta1 = c.get_double("train_beta1", e.training.adam_beta1);
    e.training.adam_beta2 = c.get_double("train_beta2", e.training.adam_beta2);
    e.training.gamma0 = c.get_double("train_gamma0", e.training.gamma0);
    e.training.gamma_min = c.get_double("train_gamma_min", e.training.gamma_min);
    e.training.gamma_decay =
        c.get_double("train_gamma_decay", e.training.gamma_decay);
    e.training.gamma_stage_epochs =
        c.get_int("train_stage_epochs", e.training.gamma_stage_epochs);
    e.training.sigma_train = c.get_double("train_sigma", e.training.sigma_train);
    e.training.hidden1 = c.get_int("train_hidden1", e.training.hidden1);
    e.training.hidden2 = c.get_int("train_hidden2", e.training.hidden2);
    e.training.beta = c.get_double("train_beta", e.training.beta);
    e.training.alpha = c.get_double("train_alpha", e.training.alpha);
    e.training.seed = c.get_u64("train_seed", e.training.seed);

    e.data_dir = c.get_string("data_dir", e.data_dir);
    e.output_dir = c.get_string("output_dir", e.output_dir);
    e.checkpoint = c.get_string("checkpoint", e.output_dir + "/model.lpn");
    e.jobs = c.get_int("jobs", e.jobs);
    if (c.has("threshold"))
        e.threshold = c.get_double("threshold", 0.0);

    if (e.budgets.empty())
        throw std::runtime_error("config: budgets must be nonempty");
    for (int b : e.budgets)
        if (b < 1 || b > e.geometry.candidate_angles)
            throw std::runtime_error("config: budget out of range: "
                                     + std::to_string(b));
    if (e.n_seeds < 2)
        throw std::runtime_error("config: n_seeds must be >= 2");
    if (e.sigma < 0.0)
        throw std::runtime_error("config: sigma must be >= 0");
    if (e.train_digit < 0 || e.train_digit > 9)
        throw std::runtime_error("config: train_digit must be 0..9");
    if (e.eval_per_digit < 1)
        throw std::runtime_error("config: eval_per_digit must be >= 1");
    if (e.jobs < 0)
        throw std::runtime_error("config: jobs must be >= 0");
    if (e.threshold && *e.threshold < 0.0)
        throw std::runtime_error("config: threshold must be >= 0");
    return e;
}

Splits load_splits(const ExperimentConfig& cfg)
{
    const LabeledDataset train = load_dataset(
        cfg.data_dir + "/train-images-idx3-ubyte",
        cfg.data_dir + "/train-labels-idx1-ubyte");
    const LabeledDataset test = load_dataset(
        cfg.data_dir + "/t10k-images-idx3-ubyte",
        cfg.data_dir + "/t10k-labels-idx1-ubyte");
    SplitConfig sc;
    sc.train_digit = cfg.train_digit;
    sc.eval_per_digit = cfg.eval_per_digit;
    sc.seed = cfg.split_seed;
    return make_splits(train, test, sc);
}

namespace {

const Vec& eval_image(const Splits& splits, const ExperimentConfig& cfg,
                      int digit, int index)
{
    if (digit < 0 || digit > 9)
        throw std::runtime_error("digit must be 0..9");
    if (index < 0 || index >= cfg.eval_per_digit)
        throw std::runtime_error("image index must be 0.."
                                 + std::to_string(cfg.eval_per_digit - 1));
    return splits.eval.images[static_cast<size_t>(digit) * cfg.eval_per_digit
                              + static_cast<size_t>(index)];
}

std::string train_log_csv(const std::vector<TrainEpoch>& log)
{
    std::string out = "# schema: lpnuq-train-log v1\nepoch,gamma,loss\n";
    for (const TrainEpoch& e : log)
        out += std::to_string(e.epoch) + "," + fmt(e.gamma) + "," + fmt(e.loss)
            + "\n";
    return out;
}

} // namespace

int cmd_train(const ExperimentConfig& cfg)
{
    const LabeledDataset train = load_dataset(
        cfg.data_dir + "/train-images-idx3-ubyte",
        cfg.data_dir + "/train-labels-idx1-ubyte");
    std::vector<Vec> images;
    for (std::size_t i = 0; i < train.size(); ++i)
        if (train.labels[i] == cfg.train_digit)
            images.push_back(train.images[i]);
    if (images.empty())
        throw std::runtime_error("cmd_train: no images of digit "
                                 + std::to_string(cfg.train_digit));
    std::cout << "training on " << images.size() << " images of digit "
              << cfg.train_digit << " (" << cfg.training.epochs << " epochs)\n";

    fs::create_directories(cfg.output_dir);
    TrainResult result;
    try {
        result = train_prior(images, cfg.training);
    } catch (const TrainingError& e) {
        // Keep the partial log around for diagnosis, then fail.
        write_file_atomic(cfg.output_dir + "/train_log.csv",
                          train_log_csv(e.log));
        throw;
    }

    if (!cfg.checkpoint.empty()) {
        const fs::path parent = fs::path(cfg.checkpoint).parent_path();
        if (!parent.empty())
            fs::create_directories(parent);
    }
    save_model(result.model, cfg.checkpoint);
    write_file_atomic(cfg.output_dir + "/train_log.csv",
                      train_log_csv(result.log));

    for (const TrainEpoch& e : result.log)
        std::cout << "epoch " << e.epoch << " gamma " << fmt(e.gamma)
                  << " loss " << fmt(e.loss) << "\n";
    std::cout << "checkpoint written to " << cfg.checkpoint << "\n";
    return 0;
}

int cmd_reconstruct(const ExperimentConfig& cfg, int digit, int index,
                    int n_views, int seed, const std::string& method)
{
    if (method != "lpn" && method != "fbp")
        throw std::runtime_error("method must be lpn or fbp");
    if (n_views < 1 || n_views > cfg.geometry.candidate_angles)
        throw std::runtime_error("n_views out of range");
    if (seed < 0)
        throw std::runtime_error("seed must be >= 0");

    const Splits splits = load_splits(cfg);
    const Vec& x = eval_image(splits, cfg, digit, index);

    const std::uint64_t unit = cell_seed(cfg.base_seed, digit, index, n_views);
    const AngleSet angles = draw_angle_subset(
        cfg.geometry, n_views, unit * 10007 + static_cast<std::uint64_t>(seed));
    const SparseOperator op = build_operator(cfg.geometry, angles);
    const Vec y = simulate_measurement(
        op, x, cfg.sigma, unit * 10009 + static_cast<std::uint64_t>(seed));

    Vec recon;
    if (method == "lpn") {
        const PriorModel model = load_model(cfg.checkpoint);
        recon = reconstruct(cfg.geometry, angles, op, y, make_prox(model),
                            cfg.solver)
                    .image;
    } else {
        recon = clamp01(fbp_reconstruct(cfg.geometry, angles, y, cfg.fbp));
    }

    const Vec clamped = clamp01(recon);
    const double p = psnr(clamped, x);
    const double s = ssim(clamped, x, cfg.geometry.image_side);

    fs::create_directories(cfg.output_dir);
    const std::string stem = cfg.output_dir + "/recon_"
        + unit_name(digit, index, n_views, method) + "_s" + std::to_string(seed);
    write_pgm16(stem + ".pgm", clamped, cfg.geometry.image_side);

    std::string csv = "# schema: lpnuq-recon v1\n"
                      "digit,index,n_views,seed,method,psnr,ssim\n";
    csv += std::to_string(digit) + "," + std::to_string(index) + ","
        + std::to_string(n_views) + "," + std::to_string(seed) + "," + method
        + "," + fmt(p) + "," + fmt(s) + "\n";
    write_file_atomic(stem + ".csv", csv);

    std::cout << "digit " << digit << " index " << index << " views "
              << n_views << " seed " << seed << " method " << method
              << " psnr " << fmt(p) << " ssim " << fmt(s) << "\n";
    return 0;
}

namespace {

std::string pixel_csv(const Vec& img)
{
    std::string out = "# schema: lpnuq-pixels v1\npixel,value\n";
    for (Eigen::Index i = 0; i < img.size(); ++i)
        out += std::to_string(i) + "," + fmt(img[i]) + "\n";
    return out;
}

} // namespace

int cmd_uq(const ExperimentConfig& cfg, int digit, int index, int n_views)
{
    if (n_views < 1 || n_views > cfg.geometry.candidate_angles)
        throw std::runtime_error("n_views out of range");

    const Splits splits = load_splits(cfg);
    const Vec& x = eval_image(splits, cfg, digit, index);
    const PriorModel model = load_model(cfg.checkpoint);

    UqProtocol protocol;
    protocol.n_views = n_views;
    protocol.n_seeds = cfg.n_seeds;
    protocol.sigma = cfg.sigma;
    protocol.base_seed = cell_seed(cfg.base_seed, digit, index, n_views);
    protocol.resample_mode = cfg.resample_mode;
    protocol.solver = cfg.solver;

    const UncertaintyReport report = run_uq(x, cfg.geometry, protocol,
                                            make_prox(model));

    const std::string dir = cfg.output_dir + "/uq_d" + std::to_string(digit)
        + "_i" + std::to_string(index) + "_v" + std::to_string(n_views);
    fs::create_directories(dir);

    const int side = cfg.geometry.image_side;
    write_pgm16(dir + "/mean.pgm", report.mean_image, side);
    const double std_max = report.std_image.maxCoeff();
    const Vec std_vis = std_max > 0.0
        ? Vec(report.std_image / std_max)
        : Vec(Vec::Zero(report.std_image.size()));
    write_pgm16(dir + "/std.pgm", std_vis, side);
    for (int s = 0; s < protocol.n_seeds; ++s)
        write_pgm16(dir + "/seed_" + std::to_string(s) + ".pgm",
                    clamp01(report.reconstructions[static_cast<size_t>(s)]),
                    side);

    write_file_atomic(dir + "/mean.csv", pixel_csv(report.mean_image));
    write_file_atomic(dir + "/std.csv", pixel_csv(report.std_image));

    std::string seeds = "# schema: lpnuq-uq-seeds v1\nseed,psnr,ssim\n";
    for (int s = 0; s < protocol.n_seeds; ++s)
        seeds += std::to_string(s) + ","
            + fmt(report.psnr[static_cast<size_t>(s)]) + ","
            + fmt(report.ssim[static_cast<size_t>(s)]) + "\n";
    write_file_atomic(dir + "/seeds.csv", seeds);

    std::string summary = "# schema: lpnuq-uq-summary v1\n"
                          "digit,index,n_views,score\n";
    summary += std::to_string(digit) + "," + std::to_string(index) + ","
        + std::to_string(n_views) + "," + fmt(report.score)
        + "\n# std.pgm is scaled by std_max=" + fmt(std_max) + "\n";
    write_file_atomic(dir + "/summary.csv", summary);

    std::cout << "digit " << digit << " index " << index << " views "
              << n_views << " score " << fmt(report.score) << "\n";
    if (cfg.threshold)
        std::cout << "threshold " << fmt(*cfg.threshold) << " flagged "
                  << (ood_flag(report, *cfg.threshold) ? 1 : 0) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

struct SweepUnit {
    int digit;
    int image;
    int n_views;
    std::string method;
};

struct UnitRecord {
    int digit = 0;
    int image = 0;
    int n_views = 0;
    std::string method;
    double score = 0.0;
    std::vector<double> psnr, ssim; // per seed
    Vec mean_image, std_image;
};

std::string record_csv(const UnitRecord& r)
{
    std::string out = "# schema: lpnuq-unit v1\n";
    out += "# digit=" + std::to_string(r.digit) + " image="
        + std::to_string(r.image) + " n_views=" + std::to_string(r.n_views)
        + " method=" + r.method + " score=" + fmt(r.score) + "\n";
    out += "seed,psnr,ssim\n";
    for (std::size_t s = 0; s < r.psnr.size(); ++s)
        out += std::to_string(s) + "," + fmt(r.psnr[s]) + "," + fmt(r.ssim[s])
            + "\n";
    out += "mean";
    for (Eigen::Index i = 0; i < r.mean_image.size(); ++i)
        out += "," + fmt(r.mean_image[i]);
    out += "\nstd";
    for (Eigen::Index i = 0; i < r.std_image.size(); ++i)
        out += "," + fmt(r.std_image[i]);
    out += "\n";
    return out;
}

bool parse_kv(const std::string& line, const std::string& key, std::string& out)
{
    const auto pos = line.find(key + "=");
    if (pos == std::string::npos)
        return false;
    const auto start = pos + key.size() + 1;
    const auto end = line.find(' ', start);
    out = line.substr(start, end == std::string::npos ? end : end - start);
    return true;
}

std::vector<double> split_doubles(const std::string& line, std::size_t skip)
{
    std::vector<double> out;
    std::istringstream in(line);
    std::string item;
    std::size_t idx = 0;
    while (std::getline(in, item, ',')) {
        if (idx++ < skip)
            continue;
        out.push_back(std::strtod(item.c_str(), nullptr));
    }
    return out;
}

// A unit is complete iff its record parses and matches the expected shape;
// half-written files never exist (atomic rename), stale ones are redone.
std::optional<UnitRecord> parse_record(const std::string& path,
                                       const SweepUnit& unit, int n_seeds,
                                       Eigen::Index pixels)
{
    std::ifstream f(path);
    if (!f)
        return std::nullopt;
    std::string line;
    if (!std::getline(f, line) || line != "# schema: lpnuq-unit v1")
        return std::nullopt;
    if (!std::getline(f, line))
        return std::nullopt;
    UnitRecord r;
    std::string v;
    if (!parse_kv(line, "digit", v))
        return std::nullopt;
    r.digit = std::atoi(v.c_str());
    if (!parse_kv(line, "image", v))
        return std::nullopt;
    r.image = std::atoi(v.c_str());
    if (!parse_kv(line, "n_views", v))
        return std::nullopt;
    r.n_views = std::atoi(v.c_str());
    if (!parse_kv(line, "method", v))
        return std::nullopt;
    r.method = v;
    if (!parse_kv(line, "score", v))
        return std::nullopt;
    r.score = std::strtod(v.c_str(), nullptr);
    if (r.digit != unit.digit || r.image != unit.image
        || r.n_views != unit.n_views || r.method != unit.method)
        return std::nullopt;
    if (!std::getline(f, line) || line != "seed,psnr,ssim")
        return std::nullopt;
    for (int s = 0; s < n_seeds; ++s) {
        if (!std::getline(f, line))
            return std::nullopt;
        const auto vals = split_doubles(line, 0);
        if (vals.size() != 3 || static_cast<int>(vals[0]) != s)
            return std::nullopt;
        r.psnr.push_back(vals[1]);
        r.ssim.push_back(vals[2]);
    }
    if (!std::getline(f, line) || line.rfind("mean,", 0) != 0)
        return std::nullopt;
    auto mean = split_doubles(line, 1);
    if (static_cast<Eigen::Index>(mean.size()) != pixels)
        return std::nullopt;
    if (!std::getline(f, line) || line.rfind("std,", 0) != 0)
        return std::nullopt;
    auto sd = split_doubles(line, 1);
    if (static_cast<Eigen::Index>(sd.size()) != pixels)
        return std::nullopt;
    r.mean_image = Eigen::Map<Vec>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    r.std_image = Eigen::Map<Vec>(sd.data(), static_cast<Eigen::Index>(sd.size()));
    return r;
}

double mean_of(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v)
{
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

} // namespace

int cmd_experiment(const ExperimentConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Splits splits = load_splits(cfg);
    const PriorModel model = load_model(cfg.checkpoint);

    const std::string records_dir = cfg.output_dir + "/records";
    fs::create_directories(records_dir);

    const std::vector<std::string> methods = {"lpn", "fbp"};
    std::vector<SweepUnit> units;
    for (int d = 0; d <= 9; ++d)
        for (int i = 0; i < cfg.eval_per_digit; ++i)
            for (int v : cfg.budgets)
                for (const std::string& m : methods)
                    units.push_back({d, i, v, m});

    // Resume: a parseable record file marks its unit complete.
    std::vector<int> todo;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const std::string path = records_dir + "/unit_"
            + unit_name(units[u].digit, units[u].image, units[u].n_views,
                        units[u].method)
            + ".csv";
        if (!parse_record(path, units[u], cfg.n_seeds, cfg.geometry.pixels()))
            todo.push_back(static_cast<int>(u));
    }
    std::cout << units.size() << " sweep units, " << todo.size()
              << " to run (" << (units.size() - todo.size())
              << " already complete)\n";

    std::mutex mu;
    std::vector<std::pair<std::string, std::string>> failures;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};

    const auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= todo.size())
                return;
            const SweepUnit& unit = units[static_cast<size_t>(todo[k])];
            const std::string name = unit_name(unit.digit, unit.image,
                                               unit.n_views, unit.method);
            try {
                const Vec& x = eval_image(splits, cfg, unit.digit, unit.image);
                UqProtocol protocol;
                protocol.n_views = unit.n_views;
                protocol.n_seeds = cfg.n_seeds;
                protocol.sigma = cfg.sigma;
                protocol.base_seed = cell_seed(cfg.base_seed, unit.digit,
                                               unit.image, unit.n_views);
                protocol.resample_mode = cfg.resample_mode;
                protocol.solver = cfg.solver;

                const Reconstructor recon = unit.method == "lpn"
                    ? make_pgd_reconstructor(make_prox(model), cfg.solver)
                    : make_fbp_reconstructor(cfg.fbp);
                const UncertaintyReport report =
                    run_uq(x, cfg.geometry, protocol, recon);

                UnitRecord r;
                r.digit = unit.digit;
                r.image = unit.image;
                r.n_views = unit.n_views;
                r.method = unit.method;
                r.score = report.score;
                r.psnr = report.psnr;
                r.ssim = report.ssim;
                r.mean_image = report.mean_image;
                r.std_image = report.std_image;
                write_file_atomic(records_dir + "/unit_" + name + ".csv",
                                  record_csv(r));
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                failures.emplace_back(name, e.what());
            }
            const std::size_t d = done.fetch_add(1) + 1;
            if (d % 60 == 0 || d == todo.size()) {
                std::lock_guard<std::mutex> lock(mu);
                std::cout << "  " << d << "/" << todo.size() << " units done\n";
            }
        }
    };

    int jobs = cfg.jobs;
    if (jobs <= 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<std::size_t>(jobs, std::max<std::size_t>(todo.size(), 1));
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
        pool.emplace_back(worker);
    for (std::thread& t : pool)
        t.join();

    // Manifest: sorted unit names plus any failures; rewritten wholesale so
    // fresh and resumed runs end with identical bytes.
    std::vector<std::string> completed;
    std::vector<UnitRecord> records;
    for (const SweepUnit& unit : units) {
        const std::string name =
            unit_name(unit.digit, unit.image, unit.n_views, unit.method);
        auto rec = parse_record(records_dir + "/unit_" + name + ".csv", unit,
                                cfg.n_seeds, cfg.geometry.pixels());
        if (rec) {
            completed.push_back(name);
            records.push_back(std::move(*rec));
        }
    }
    std::sort(failures.begin(), failures.end());
    std::string manifest = "# schema: lpnuq-manifest v1\n";
    for (const std::string& name : completed)
        manifest += "done " + name + "\n";
    for (const auto& f : failures)
        manifest += "failed " + f.first + ": " + f.second + "\n";
    write_file_atomic(cfg.output_dir + "/manifest.txt", manifest);

    if (!failures.empty()) {
        std::cerr << failures.size() << " sweep units failed; see "
                  << cfg.output_dir << "/manifest.txt\n";
        return 3;
    }

    // Aggregates are regenerated from the records alone, so resumed,
    // partial and fresh runs all serialize identical summaries.
    std::string summary = "# schema: lpnuq-summary v1\n"
                          "digit,n_views,method,psnr_mean,psnr_min,psnr_max,"
                          "psnr_std,psnr_img_mean_std,ssim_mean,ssim_min,"
                          "ssim_max,ssim_std,ssim_img_mean_std\n";
    std::string avg_std = "# schema: lpnuq-avgstd v1\n"
                          "digit,n_views,method,score_mean\n";
    for (int d = 0; d <= 9; ++d) {
        for (int v : cfg.budgets) {
            for (const std::string& m : methods) {
                std::vector<double> ps, ss, scores, ps_img, ss_img;
                for (const UnitRecord& r : records) {
                    if (r.digit != d || r.n_views != v || r.method != m)
                        continue;
                    ps.insert(ps.end(), r.psnr.begin(), r.psnr.end());
                    ss.insert(ss.end(), r.ssim.begin(), r.ssim.end());
                    ps_img.push_back(mean_of(r.psnr));
                    ss_img.push_back(mean_of(r.ssim));
                    scores.push_back(r.score);
                }
                if (ps.empty())
                    continue;
                summary += std::to_string(d) + "," + std::to_string(v) + ","
                    + m + "," + fmt(mean_of(ps)) + ","
                    + fmt(*std::min_element(ps.begin(), ps.end())) + ","
                    + fmt(*std::max_element(ps.begin(), ps.end())) + ","
                    + fmt(pop_std(ps)) + "," + fmt(pop_std(ps_img)) + ","
                    + fmt(mean_of(ss)) + ","
                    + fmt(*std::min_element(ss.begin(), ss.end())) + ","
                    + fmt(*std::max_element(ss.begin(), ss.end())) + ","
                    + fmt(pop_std(ss)) + "," + fmt(pop_std(ss_img)) + "\n";
                avg_std += std::to_string(d) + "," + std::to_string(v) + ","
                    + m + "," + fmt(mean_of(scores)) + "\n";
            }
        }
    }
    write_file_atomic(cfg.output_dir + "/summary.csv", summary);
    write_file_atomic(cfg.output_dir + "/avg_std.csv", avg_std);

    // Mean/std image grids (digits down, eval images across) per budget and
    // method; std grids share one scale recorded alongside.
    const int side = cfg.geometry.image_side;
    std::string scales = "# schema: lpnuq-gridscale v1\nn_views,method,std_max\n";
    for (int v : cfg.budgets) {
        for (const std::string& m : methods) {
            const int gw = side * cfg.eval_per_digit;
            const int gh = side * 10;
            Vec mean_grid = Vec::Zero(static_cast<Eigen::Index>(gw) * gh);
            Vec std_grid = Vec::Zero(static_cast<Eigen::Index>(gw) * gh);
            double std_max = 0.0;
            for (const UnitRecord& r : records)
                if (r.n_views == v && r.method == m)
                    std_max = std::max(std_max, r.std_image.maxCoeff());
            for (const UnitRecord& r : records) {
                if (r.n_views != v || r.method != m)
                    continue;
                for (int row = 0; row < side; ++row)
                    for (int col = 0; col < side; ++col) {
                        const Eigen::Index src =
                            static_cast<Eigen::Index>(row) * side + col;
                        const Eigen::Index dst =
                            static_cast<Eigen::Index>(r.digit * side + row) * gw
                            + r.image * side + col;
                        mean_grid[dst] = r.mean_image[src];
                        std_grid[dst] = std_max > 0.0
                            ? r.std_image[src] / std_max
                            : 0.0;
                    }
            }
            // write_pgm16 requires square images; grids are square when
            // eval_per_digit == 10, which the protocol fixes.
            if (gw == gh) {
                write_pgm16(cfg.output_dir + "/mean_grid_v" + std::to_string(v)
                                + "_" + m + ".pgm",
                            mean_grid, gh);
                write_pgm16(cfg.output_dir + "/std_grid_v" + std::to_string(v)
                                + "_" + m + ".pgm",
                            std_grid, gh);
            }
            scales += std::to_string(v) + "," + m + "," + fmt(std_max) + "\n";
        }
    }
    write_file_atomic(cfg.output_dir + "/grid_scales.csv", scales);

    const auto dt = std::chrono::duration_cast<std::chrono::seconds>(
        std::chrono::steady_clock::now() - t0);
    std::cout << "sweep complete: " << records.size() << " units, "
              << records.size() * static_cast<std::size_t>(cfg.n_seeds)
              << " reconstructions, " << dt.count() << " s\n";
    return 0;
}

} // namespace lpnuq
