#include "lpnuq/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lpnuq {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

const std::vector<std::string>& Config::known_keys()
{
    static const std::vector<std::string> keys = {
        // paths
        "data_dir", "output_dir", "checkpoint",
        // scan geometry
        "image_side", "detector_bins", "source_to_center",
        "center_to_detector", "detector_spacing", "candidate_angles",
        // measurement protocol
        "budgets", "n_views", "n_seeds", "sigma", "base_seed",
        "resample_mode",
        // data splits
        "train_digit", "eval_per_digit", "split_seed",
        // solver
        "solver_max_iters", "solver_step_scale", "solver_tau", "solver_init",
        "solver_clamp", "solver_reg_weight",
        // filtered back-projection
        "fbp_cutoff", "fbp_fan_weighting",
        // training
        "train_epochs", "train_batch_size", "train_lr",
        "train_beta1", "train_beta2",
        "train_gamma0", "train_gamma_min", "train_gamma_decay",
        "train_stage_epochs", "train_sigma",
        "train_hidden1", "train_hidden2", "train_beta", "train_alpha",
        "train_seed",
        // orchestration
        "jobs", "threshold",
    };
    return keys;
}

Config Config::from_file(const std::string& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

Config Config::from_string(const std::string& text)
{
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: line " + std::to_string(lineno)
                                     + ": expected key = value");
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

bool Config::has(const std::string& key) const
{
    return values_.count(key) != 0;
}

void Config::set(const std::string& key, const std::string& value)
{
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw std::runtime_error("config: unknown key '" + key + "'");
    values_[key] = value;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const
{
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int Config::get_int(const std::string& key, int fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    try {
        std::size_t pos = 0;
        const int v = std::stoi(it->second, &pos);
        if (pos != it->second.size())
            throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "': expected integer, got '"
                                 + it->second + "'");
    }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size())
            throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key
                                 + "': expected unsigned integer, got '"
                                 + it->second + "'");
    }
}

double Config::get_double(const std::string& key, double fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size())
            throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "': expected number, got '"
                                 + it->second + "'");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw std::runtime_error("config: key '" + key + "': expected boolean, got '"
                             + v + "'");
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      const std::vector<int>& fallback) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        return fallback;
    std::vector<int> out;
    std::istringstream in(it->second);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty())
            continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stoi(item, &pos));
            if (pos != item.size())
                throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::runtime_error("config: key '" + key
                                     + "': expected integer list, got '"
                                     + it->second + "'");
        }
    }
    if (out.empty())
        throw std::runtime_error("config: key '" + key + "': empty list");
    return out;
}

} // namespace lpnuq
