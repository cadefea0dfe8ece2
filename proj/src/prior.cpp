#include "lpnuq/prior.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "lpnuq/rng.hpp"

namespace lpnuq {

namespace {

// Stable softplus family, parameterized by bt = beta * t.
double sp(double bt, double beta)
{
    if (bt > 0.0)
        return bt / beta + std::log1p(std::exp(-bt)) / beta;
    return std::log1p(std::exp(bt)) / beta;
}

double sp_d1(double bt) // logistic(bt)
{
    if (bt >= 0.0)
        return 1.0 / (1.0 + std::exp(-bt));
    const double e = std::exp(bt);
    return e / (1.0 + e);
}

double sp_d2(double bt, double beta)
{
    const double l = sp_d1(bt);
    return beta * l * (1.0 - l);
}

void check_input(const PriorModel& m, const Vec& z, const char* who)
{
    if (z.size() != m.input_dim)
        throw std::invalid_argument(std::string(who) + ": input size mismatch");
}

struct Forward {
    Mat a1, s1, h1; // hidden1 x batch
    Mat a2, s2;     // hidden2 x batch
    Mat g2;         // hidden2 x batch, w3 .* s2
    Mat u;          // hidden1 x batch, wz2^T g2
    Mat g1;         // hidden1 x batch, s1 .* u
    Mat f;          // input x batch, grad psi per column
};

Forward run_forward(const PriorModel& m, const Mat& z)
{
    Forward fw;
    fw.a1 = (m.w1x * z).colwise() + m.b1;
    fw.s1 = fw.a1.unaryExpr([&](double t) { return sp_d1(m.beta * t); });
    fw.h1 = fw.a1.unaryExpr([&](double t) { return sp(m.beta * t, m.beta); });
    fw.a2 = ((m.wz2 * fw.h1 + m.w2x * z).colwise() + m.b2);
    fw.s2 = fw.a2.unaryExpr([&](double t) { return sp_d1(m.beta * t); });
    fw.g2 = fw.s2.array().colwise() * m.w3.array();
    fw.u = m.wz2.transpose() * fw.g2;
    fw.g1 = fw.s1.cwiseProduct(fw.u);
    fw.f = ((m.w1x.transpose() * fw.g1 + m.w2x.transpose() * fw.g2).colwise()
            + m.w3x)
        + m.alpha * z;
    return fw;
}

} // namespace

PriorModel init_prior(int input_dim, int hidden1, int hidden2, double beta,
                      double alpha, std::uint64_t seed)
{
    if (input_dim <= 0 || hidden1 <= 0 || hidden2 <= 0)
        throw std::invalid_argument("init_prior: sizes must be positive");
    if (beta <= 0.0 || alpha < 0.0)
        throw std::invalid_argument("init_prior: bad beta/alpha");

    PriorModel m;
    m.input_dim = input_dim;
    m.hidden1 = hidden1;
    m.hidden2 = hidden2;
    m.beta = beta;
    m.alpha = alpha;

    Rng rng(seed);
    const double in_scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double h1_scale = 1.0 / std::sqrt(static_cast<double>(hidden1));
    const double h2_scale = 1.0 / std::sqrt(static_cast<double>(hidden2));

    // Fill order is part of the determinism contract: row-major, in
    // declaration order.
    m.w1x.resize(hidden1, input_dim);
    for (int r = 0; r < hidden1; ++r)
        for (int c = 0; c < input_dim; ++c)
            m.w1x(r, c) = rng.gaussian() * in_scale;
    m.b1 = Vec::Zero(hidden1);
    m.wz2.resize(hidden2, hidden1);
    for (int r = 0; r < hidden2; ++r)
        for (int c = 0; c < hidden1; ++c)
            m.wz2(r, c) = std::abs(rng.gaussian()) * h1_scale;
    m.w2x.resize(hidden2, input_dim);
    for (int r = 0; r < hidden2; ++r)
        for (int c = 0; c < input_dim; ++c)
            m.w2x(r, c) = rng.gaussian() * in_scale;
    m.b2 = Vec::Zero(hidden2);
    m.w3.resize(hidden2);
    for (int r = 0; r < hidden2; ++r)
        m.w3[r] = std::abs(rng.gaussian()) * h2_scale;
    m.w3x = Vec::Zero(input_dim);
    return m;
}

double potential(const PriorModel& m, const Vec& z)
{
    check_input(m, z, "potential");
    const Vec a1 = m.w1x * z + m.b1;
    const Vec h1 = a1.unaryExpr([&](double t) { return sp(m.beta * t, m.beta); });
    const Vec a2 = m.wz2 * h1 + m.w2x * z + m.b2;
    const Vec h2 = a2.unaryExpr([&](double t) { return sp(m.beta * t, m.beta); });
    return m.w3.dot(h2) + m.w3x.dot(z) + 0.5 * m.alpha * z.squaredNorm();
}

Vec prox_apply(const PriorModel& m, const Vec& z)
{
    check_input(m, z, "prox_apply");
    const Forward fw = run_forward(m, z);
    return fw.f.col(0);
}

double prox_match_loss(const PriorModel& m, const std::vector<Vec>& x,
                       const std::vector<Vec>& z, double gamma,
                       PriorGrads* grads)
{
    if (gamma <= 0.0)
        throw std::invalid_argument("prox_match_loss: gamma must be positive");
    if (x.empty() || x.size() != z.size())
        throw std::invalid_argument("prox_match_loss: empty or mismatched batch");
    const int n = m.input_dim;
    const int nb = static_cast<int>(x.size());
    Mat xm(n, nb), zm(n, nb);
    for (int i = 0; i < nb; ++i) {
        if (x[static_cast<size_t>(i)].size() != n
            || z[static_cast<size_t>(i)].size() != n)
            throw std::invalid_argument("prox_match_loss: sample size mismatch");
        xm.col(i) = x[static_cast<size_t>(i)];
        zm.col(i) = z[static_cast<size_t>(i)];
    }

    const Forward fw = run_forward(m, zm);
    if (!fw.f.allFinite())
        throw std::runtime_error("prox_match_loss: non-finite forward pass (gamma="
                                 + std::to_string(gamma) + ")");

    const Mat diff = fw.f - xm;
    double loss = 0.0;
    Vec scale(nb); // d loss / d r^2, folded with the 1/nb batch mean
    for (int i = 0; i < nb; ++i) {
        const double r2 = diff.col(i).squaredNorm();
        const double e = std::exp(-r2 / (gamma * gamma));
        loss += 1.0 - e;
        scale[i] = 2.0 * e / (gamma * gamma * nb);
    }
    loss /= nb;

    if (grads) {
        // Reverse pass over the explicit gradient graph: the "output" here
        // is f = grad psi, so this is a second-order computation.
        const Mat q = diff.array().rowwise() * scale.transpose().array();

        Mat g1_bar = m.w1x * q;               // hidden1 x nb
        Mat g2_bar = m.w2x * q;               // hidden2 x nb
        grads->w3x = q.rowwise().sum();
        grads->w1x = fw.g1 * q.transpose();   // from f = w1x^T g1 + ...
        grads->w2x = fw.g2 * q.transpose();

        const Mat u_bar = g1_bar.cwiseProduct(fw.s1);
        const Mat s1_bar = g1_bar.cwiseProduct(fw.u);
        g2_bar += m.wz2 * u_bar;
        grads->wz2 = fw.g2 * u_bar.transpose();

        grads->w3 = g2_bar.cwiseProduct(fw.s2).rowwise().sum();
        const Mat s2_bar = g2_bar.array().colwise() * m.w3.array();

        const Mat a2_bar = s2_bar.cwiseProduct(
            fw.a2.unaryExpr([&](double t) { return sp_d2(m.beta * t, m.beta); }));
        Mat a1_bar = s1_bar.cwiseProduct(
            fw.a1.unaryExpr([&](double t) { return sp_d2(m.beta * t, m.beta); }));

        const Mat h1_bar = m.wz2.transpose() * a2_bar;
        grads->wz2 += a2_bar * fw.h1.transpose();
        grads->w2x += a2_bar * zm.transpose();
        grads->b2 = a2_bar.rowwise().sum();

        a1_bar += h1_bar.cwiseProduct(fw.s1);
        grads->w1x += a1_bar * zm.transpose();
        grads->b1 = a1_bar.rowwise().sum();
    }
    return loss;
}

TrainResult train_prior(const std::vector<Vec>& images,
                        const ProxMatchConfig& cfg)
{
    if (images.empty())
        throw std::invalid_argument("train_prior: empty dataset");
    if (!(cfg.gamma0 >= cfg.gamma_min) || !(cfg.gamma_min > 0.0))
        throw std::invalid_argument("train_prior: need gamma0 >= gamma_min > 0");
    if (cfg.gamma_decay <= 0.0 || cfg.gamma_decay > 1.0)
        throw std::invalid_argument("train_prior: decay must be in (0, 1]");
    if (cfg.sigma_train <= 0.0)
        throw std::invalid_argument("train_prior: sigma_train must be positive");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.gamma_stage_epochs < 1)
        throw std::invalid_argument("train_prior: bad epochs/batch_size/stage");
    const int n = static_cast<int>(images[0].size());
    for (const Vec& img : images) {
        if (static_cast<int>(img.size()) != n)
            throw std::invalid_argument("train_prior: inconsistent image sizes");
        for (Eigen::Index p = 0; p < img.size(); ++p)
            if (!(img[p] >= 0.0 && img[p] <= 1.0))
                throw std::invalid_argument("train_prior: pixels must lie in [0,1]");
    }

    Rng rng(cfg.seed);
    TrainResult res;
    res.model = init_prior(n, cfg.hidden1, cfg.hidden2, cfg.beta, cfg.alpha,
                           rng.next_u64());
    PriorModel& m = res.model;

    // Adam moments.  The matching loss scales every gradient by
    // exp(-r^2/gamma^2), so raw magnitudes swing over orders of magnitude as
    // gamma anneals; per-parameter normalisation keeps the step size usable
    // across the whole schedule where a fixed-rate update stalls.
    PriorGrads mom1, mom2;
    for (PriorGrads* b : {&mom1, &mom2}) {
        b->w1x = Mat::Zero(cfg.hidden1, n);
        b->b1 = Vec::Zero(cfg.hidden1);
        b->wz2 = Mat::Zero(cfg.hidden2, cfg.hidden1);
        b->w2x = Mat::Zero(cfg.hidden2, n);
        b->b2 = Vec::Zero(cfg.hidden2);
        b->w3 = Vec::Zero(cfg.hidden2);
        b->w3x = Vec::Zero(n);
    }
    long step = 0;

    const int total = static_cast<int>(images.size());
    std::vector<int> order(static_cast<size_t>(total));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const int stage = epoch / cfg.gamma_stage_epochs;
        const double gamma = std::max(
            cfg.gamma_min, cfg.gamma0 * std::pow(cfg.gamma_decay, stage));
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (int start = 0; start < total; start += cfg.batch_size) {
            const int nb = std::min(cfg.batch_size, total - start);
            std::vector<Vec> xs, zs;
            xs.reserve(static_cast<size_t>(nb));
            zs.reserve(static_cast<size_t>(nb));
            for (int i = 0; i < nb; ++i) {
                const Vec& x = images[static_cast<size_t>(order[static_cast<size_t>(start + i)])];
                Vec zi(n);
                for (int p = 0; p < n; ++p)
                    zi[p] = x[p] + cfg.sigma_train * rng.gaussian();
                xs.push_back(x);
                zs.push_back(std::move(zi));
            }
            PriorGrads g;
            double loss;
            try {
                loss = prox_match_loss(m, xs, zs, gamma, &g);
            } catch (const std::runtime_error& e) {
                throw TrainingError(std::string("train_prior: ") + e.what(),
                                    res.log);
            }
            if (!std::isfinite(loss))
                throw TrainingError(
                    "train_prior: non-finite loss at epoch "
                        + std::to_string(epoch),
                    res.log);
            loss_sum += loss * nb;

            ++step;
            const double lr = cfg.learning_rate;
            const double b1c = 1.0 - std::pow(cfg.adam_beta1, double(step));
            const double b2c = 1.0 - std::pow(cfg.adam_beta2, double(step));
            auto adam = [&](auto& param, auto& m1, auto& m2, const auto& grad) {
                m1 = cfg.adam_beta1 * m1 + (1.0 - cfg.adam_beta1) * grad;
                m2.array() = cfg.adam_beta2 * m2.array()
                             + (1.0 - cfg.adam_beta2) * grad.array().square();
                param.array() -= lr * (m1.array() / b1c)
                                 / ((m2.array() / b2c).sqrt() + cfg.adam_eps);
            };
            adam(m.w1x, mom1.w1x, mom2.w1x, g.w1x);
            adam(m.b1, mom1.b1, mom2.b1, g.b1);
            adam(m.wz2, mom1.wz2, mom2.wz2, g.wz2);
            adam(m.w2x, mom1.w2x, mom2.w2x, g.w2x);
            adam(m.b2, mom1.b2, mom2.b2, g.b2);
            adam(m.w3, mom1.w3, mom2.w3, g.w3);
            adam(m.w3x, mom1.w3x, mom2.w3x, g.w3x);
            // Projection that keeps psi convex.
            m.wz2 = m.wz2.cwiseMax(0.0);
            m.w3 = m.w3.cwiseMax(0.0);
        }
        res.log.push_back({epoch, gamma, loss_sum / total});
    }
    return res;
}

namespace {

constexpr char kMagic[8] = {'L', 'P', 'N', 'P', 'R', 'I', 'O', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v)
{
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Cursor {
    const std::uint8_t* p;
    std::size_t left;

    void need(std::size_t n)
    {
        if (left < n)
            throw std::runtime_error("load_model: truncated file");
    }
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    double f64()
    {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= std::uint64_t(p[i]) << (8 * i);
        double v;
        std::memcpy(&v, &bits, 8);
        p += 8;
        left -= 8;
        return v;
    }
};

void put_mat(std::string& out, const Mat& m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            put_f64(out, m(r, c));
}

void put_vec(std::string& out, const Vec& v)
{
    for (Eigen::Index i = 0; i < v.size(); ++i)
        put_f64(out, v[i]);
}

Mat get_mat(Cursor& cur, int rows, int cols)
{
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = cur.f64();
    return m;
}

Vec get_vec(Cursor& cur, int n)
{
    Vec v(n);
    for (int i = 0; i < n; ++i)
        v[i] = cur.f64();
    return v;
}

} // namespace

void save_model(const PriorModel& m, const std::string& path)
{
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(m.input_dim));
    put_u32(out, static_cast<std::uint32_t>(m.hidden1));
    put_u32(out, static_cast<std::uint32_t>(m.hidden2));
    put_f64(out, m.beta);
    put_f64(out, m.alpha);
    put_mat(out, m.w1x);
    put_vec(out, m.b1);
    put_mat(out, m.wz2);
    put_mat(out, m.w2x);
    put_vec(out, m.b2);
    put_vec(out, m.w3);
    put_vec(out, m.w3x);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("save_model: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f)
        throw std::runtime_error("save_model: write failed for " + path);
}

PriorModel load_model(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("load_model: cannot open " + path);
    std::vector<std::uint8_t> bytes(
        (std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof(kMagic)
        || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_model: bad magic");
    Cursor cur{bytes.data() + sizeof(kMagic), bytes.size() - sizeof(kMagic)};
    const std::uint32_t version = cur.u32();
    if (version != kVersion)
        throw std::runtime_error("load_model: unsupported version "
                                 + std::to_string(version));
    PriorModel m;
    m.input_dim = static_cast<int>(cur.u32());
    m.hidden1 = static_cast<int>(cur.u32());
    m.hidden2 = static_cast<int>(cur.u32());
    if (m.input_dim <= 0 || m.hidden1 <= 0 || m.hidden2 <= 0)
        throw std::runtime_error("load_model: bad layer sizes");
    m.beta = cur.f64();
    m.alpha = cur.f64();
    m.w1x = get_mat(cur, m.hidden1, m.input_dim);
    m.b1 = get_vec(cur, m.hidden1);
    m.wz2 = get_mat(cur, m.hidden2, m.hidden1);
    m.w2x = get_mat(cur, m.hidden2, m.input_dim);
    m.b2 = get_vec(cur, m.hidden2);
    m.w3 = get_vec(cur, m.hidden2);
    m.w3x = get_vec(cur, m.input_dim);
    if (cur.left != 0)
        throw std::runtime_error("load_model: trailing bytes");
    if (!(m.beta > 0.0) || !(m.alpha >= 0.0) || !m.w1x.allFinite()
        || !m.b1.allFinite() || !m.wz2.allFinite() || !m.w2x.allFinite()
        || !m.b2.allFinite() || !m.w3.allFinite() || !m.w3x.allFinite())
        throw std::runtime_error("load_model: non-finite values");
    if (m.wz2.minCoeff() < 0.0 || m.w3.minCoeff() < 0.0)
        throw std::runtime_error("load_model: negative convexity weights");
    return m;
}

} // namespace lpnuq
