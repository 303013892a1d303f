#include "core/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <list>
#include <sstream>
#include <unordered_map>

namespace ripple {

void KernelSpec::validate() const {
    switch (kind) {
        case KernelKind::linear:
            return;
        case KernelKind::polynomial:
            if (degree < 1 || degree > 4) fail_invalid("polynomial degree must be in 1..4");
            return;
        case KernelKind::gaussian_rbf:
            if (sigma <= 0.0) fail_invalid("sigma must be positive");
            return;
        case KernelKind::sigmoid:
            return;
    }
    fail_invalid("unknown kernel kind");
}

double kernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec) {
    if (a.size() != b.size()) fail_invalid("kernel operands have different dimensions");
    switch (spec.kind) {
        case KernelKind::linear: {
            double dot = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
            return dot;
        }
        case KernelKind::polynomial: {
            double dot = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
            double base = dot + 1.0;
            double p = 1.0;
            for (int d = 0; d < spec.degree; ++d) p *= base;
            return p;
        }
        case KernelKind::gaussian_rbf: {
            double d2 = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                double d = a[i] - b[i];
                d2 += d * d;
            }
            return std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
        }
        case KernelKind::sigmoid: {
            double dot = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
            return std::tanh(spec.gamma * dot + spec.coef0);
        }
    }
    fail_invalid("unknown kernel kind");
}

void TrainingSet::validate() const {
    if (x.empty()) fail_invalid("training set is empty");
    if (x.size() != y.size()) fail_invalid("training set sample/label count mismatch");
    std::size_t d = x.front().size();
    if (d == 0) fail_invalid("training vectors are zero-dimensional");
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].size() != d) fail_invalid("training vectors have inconsistent dimensions");
        if (y[i] == 1)
            pos = true;
        else if (y[i] == -1)
            neg = true;
        else
            fail_invalid("labels must be +1 or -1");
    }
    if (!pos || !neg) fail_invalid("training set must contain both classes");
}

double SvmModel::decision_value(std::span<const double> x) const {
    if (!support_vectors.empty() && x.size() != dim())
        fail_invalid("input dimension does not match the model");
    double f = bias;
    if (feature_offset.empty()) {
        for (std::size_t i = 0; i < support_vectors.size(); ++i)
            f += coeff[i] * ripple::kernel(support_vectors[i], x, kernel);
        return f;
    }
    if (feature_offset.size() != x.size() || feature_scale.size() != x.size())
        fail_invalid("model scaling dimension mismatch");
    std::vector<double> scaled(x.size());
    for (std::size_t d = 0; d < x.size(); ++d)
        scaled[d] = (x[d] - feature_offset[d]) * feature_scale[d];
    for (std::size_t i = 0; i < support_vectors.size(); ++i)
        f += coeff[i] * ripple::kernel(support_vectors[i], scaled, kernel);
    return f;
}

int SvmModel::decide(std::span<const double> x) const {
    return decision_value(x) >= 0.0 ? 1 : -1;
}

namespace {

// Kernel row provider with an LRU budget; small sets stay fully resident.
class KernelCache {
public:
    KernelCache(const TrainingSet& data, const KernelSpec& spec)
        : data_(data), spec_(spec), rows_(data.size()) {
        std::size_t budget_bytes = 256ull << 20;
        max_rows_ = std::max<std::size_t>(2, budget_bytes / (sizeof(double) * data.size() + 1));
    }

    const std::vector<double>& row(std::size_t i) {
        if (!rows_[i].empty()) {
            touch(i);
            return rows_[i];
        }
        if (resident_.size() >= max_rows_) {
            std::size_t victim = resident_.back();
            resident_.pop_back();
            where_.erase(victim);
            rows_[victim].clear();
            rows_[victim].shrink_to_fit();
        }
        auto& r = rows_[i];
        r.resize(data_.size());
        for (std::size_t j = 0; j < data_.size(); ++j)
            r[j] = kernel(data_.x[i], data_.x[j], spec_);
        resident_.push_front(i);
        where_[i] = resident_.begin();
        return r;
    }

private:
    void touch(std::size_t i) {
        auto it = where_.find(i);
        if (it != where_.end()) resident_.splice(resident_.begin(), resident_, it->second);
    }

    const TrainingSet& data_;
    const KernelSpec& spec_;
    std::vector<std::vector<double>> rows_;
    std::list<std::size_t> resident_;
    std::unordered_map<std::size_t, std::list<std::size_t>::iterator> where_;
    std::size_t max_rows_;
};

}  // namespace

SvmModel train_smo(const TrainingSet& data, const KernelSpec& spec, double c, double tol,
                   int max_passes, SmoDiagnostics* diag, std::vector<double>* alphas_out) {
    data.validate();
    spec.validate();
    if (c <= 0.0) fail_invalid("penalty C must be positive");
    if (tol <= 0.0) fail_invalid("tol must be positive");
    if (max_passes < 1) fail_invalid("max_passes must be >= 1");

    std::size_t n = data.size();
    KernelCache cache(data, spec);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a at a = 0
    const auto& y = data.y;

    auto violation_pair = [&](std::size_t& i_out, std::size_t& j_out, double& gap) {
        double up_best = -std::numeric_limits<double>::infinity();
        double low_best = std::numeric_limits<double>::infinity();
        std::size_t iu = n, jl = n;
        for (std::size_t k = 0; k < n; ++k) {
            double v = -y[k] * grad[k];
            bool in_up = (y[k] == 1 && alpha[k] < c) || (y[k] == -1 && alpha[k] > 0.0);
            bool in_low = (y[k] == 1 && alpha[k] > 0.0) || (y[k] == -1 && alpha[k] < c);
            if (in_up && v > up_best) {
                up_best = v;
                iu = k;
            }
            if (in_low && v < low_best) {
                low_best = v;
                jl = k;
            }
        }
        i_out = iu;
        j_out = jl;
        gap = up_best - low_best;
        return up_best;
    };

    long long max_iter = static_cast<long long>(max_passes) * static_cast<long long>(std::max<std::size_t>(n, 64));
    long long iter = 0;
    double gap = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    bool stalled = false;

    // stall guard on the (monotone) dual objective: once steps stop paying,
    // the solver is at its numeric floor
    double window_progress = 0.0;
    long long window_steps = 0;
    auto stall_window = static_cast<long long>(std::max<std::size_t>(8 * n, 512));

    while (iter < max_iter) {
        violation_pair(i, j, gap);
        if (i >= n || j >= n || gap <= tol) break;
        ++iter;

        const auto& ki = cache.row(i);
        const auto& kj = cache.row(j);
        double eta = ki[i] + kj[j] - 2.0 * ki[j];

        // direction d = y_i e_i - y_j e_j; step t >= 0 reduces the objective
        double lo_i = y[i] == 1 ? -alpha[i] : alpha[i] - c;
        double hi_i = y[i] == 1 ? c - alpha[i] : alpha[i];
        double lo_j = y[j] == 1 ? alpha[j] - c : -alpha[j];
        double hi_j = y[j] == 1 ? alpha[j] : c - alpha[j];
        double lo = std::max(lo_i, lo_j);
        double hi = std::min(hi_i, hi_j);

        double t;
        if (eta > 1e-12) {
            t = (y[j] * grad[j] - y[i] * grad[i]) / eta;
            t = std::clamp(t, lo, hi);
        } else {
            t = hi;  // flat or concave along d: run to the box edge
        }
        if (t == 0.0) break;  // numerically boxed; the gap check below decides

        // objective decrease of this step: -(t d'grad + t^2 eta / 2)
        double slope = y[i] * grad[i] - y[j] * grad[j];
        window_progress += -(t * slope + 0.5 * t * t * eta);
        if (++window_steps >= stall_window) {
            if (window_progress <= 1e-14 * (1.0 + std::abs(dual_objective(data, spec, alpha)))) {
                stalled = true;  // at the numeric floor: no solver can do better
                break;
            }
            window_progress = 0.0;
            window_steps = 0;
        }

        alpha[i] += y[i] * t;
        alpha[j] -= y[j] * t;
        alpha[i] = std::clamp(alpha[i], 0.0, c);
        alpha[j] = std::clamp(alpha[j], 0.0, c);
        for (std::size_t k = 0; k < n; ++k) grad[k] += y[k] * t * (ki[k] - kj[k]);
    }

    violation_pair(i, j, gap);
    double dual = dual_objective(data, spec, alpha);
    if (diag) {
        diag->iterations = static_cast<int>(iter);
        diag->kkt_gap = gap;
        diag->dual_objective = dual;
        diag->stalled = stalled;
    }
    if (gap > tol && !stalled) {
        std::ostringstream msg;
        msg << "SMO did not converge: kkt_gap=" << gap << " tol=" << tol << " iterations=" << iter
            << " dual=" << dual;
        throw Error(ErrorCode::non_convergence, msg.str());
    }

    // bias from the free support vectors, else the midpoint of the KKT bounds
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    int free_count = 0;
    for (std::size_t k = 0; k < n; ++k) {
        double v = -y[k] * grad[k];
        if (alpha[k] > 1e-12 && alpha[k] < c - 1e-12) {
            free_sum += v;
            ++free_count;
        }
        bool in_up = (y[k] == 1 && alpha[k] < c) || (y[k] == -1 && alpha[k] > 0.0);
        bool in_low = (y[k] == 1 && alpha[k] > 0.0) || (y[k] == -1 && alpha[k] < c);
        if (in_up) m_up = std::max(m_up, v);
        if (in_low) m_low = std::min(m_low, v);
    }
    double bias = free_count > 0 ? free_sum / free_count : 0.5 * (m_up + m_low);

    SvmModel model;
    model.kernel = spec;
    model.c = c;
    model.bias = bias;
    for (std::size_t k = 0; k < n; ++k) {
        if (alpha[k] > 1e-12) {
            model.support_vectors.push_back(data.x[k]);
            model.coeff.push_back(alpha[k] * y[k]);
        }
    }
    if (alphas_out) *alphas_out = std::move(alpha);
    return model;
}

double dual_objective(const TrainingSet& data, const KernelSpec& spec,
                      std::span<const double> alphas) {
    std::size_t n = data.size();
    if (alphas.size() != n) fail_invalid("alpha size mismatch");
    double lin = 0.0, quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lin += alphas[i];
        if (alphas[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (alphas[j] == 0.0) continue;
            quad += alphas[i] * alphas[j] * data.y[i] * data.y[j] *
                    kernel(data.x[i], data.x[j], spec);
        }
    }
    return lin - 0.5 * quad;
}

namespace {

// Project v onto { 0 <= a <= C, y'a = 0 } via bisection on the shift that
// balances the equality constraint.
std::vector<double> project_feasible(const std::vector<double>& v, const std::vector<int>& y,
                                     double c) {
    double lo = -1.0, hi = 1.0;
    for (double x : v) {
        lo = std::min(lo, -(std::abs(x) + c + 1.0));
        hi = std::max(hi, std::abs(x) + c + 1.0);
    }
    auto balance = [&](double lambda) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            s += y[i] * std::clamp(v[i] - lambda * y[i], 0.0, c);
        return s;
    };
    for (int it = 0; it < 120; ++it) {
        double mid = 0.5 * (lo + hi);
        if (balance(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double lambda = 0.5 * (lo + hi);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i] - lambda * y[i], 0.0, c);
    return out;
}

// Gaussian elimination with partial pivoting; returns false when singular.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& out) {
    std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-14) return false;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[r][col] / a[col][col];
            for (std::size_t k = col; k < n; ++k) a[r][k] -= f * a[col][k];
            b[r] -= f * b[col];
        }
    }
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = b[i] / a[i][i];
    return true;
}

}  // namespace

QpSolution brute_force_qp(const TrainingSet& data, const KernelSpec& spec, double c) {
    data.validate();
    spec.validate();
    if (c <= 0.0) fail_invalid("penalty C must be positive");
    std::size_t n = data.size();
    if (n > 16) fail_invalid("brute_force_qp is capped at 16 points");

    std::vector<std::vector<double>> q(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            q[i][j] = data.y[i] * data.y[j] * kernel(data.x[i], data.x[j], spec);

    auto objective = [&](const std::vector<double>& a) {
        double lin = 0.0, quad = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lin += a[i];
            for (std::size_t j = 0; j < n; ++j) quad += a[i] * q[i][j] * a[j];
        }
        return lin - 0.5 * quad;
    };

    double row_bound = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::abs(q[i][j]);
        row_bound = std::max(row_bound, s);
    }
    double step = 1.0 / (row_bound + 1e-9);

    auto pg_burst = [&](std::vector<double>& a, int iters) {
        double last = objective(a);
        int stalls = 0;
        for (int it = 0; it < iters; ++it) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) {
                double qi = 0.0;
                for (std::size_t j = 0; j < n; ++j) qi += q[i][j] * a[j];
                v[i] = a[i] + step * (1.0 - qi);
            }
            auto next = project_feasible(v, data.y, c);
            double diff = 0.0;
            for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(next[i] - a[i]));
            a = std::move(next);
            if (diff < 1e-14) break;
            if (it % 200 == 199) {
                double val = objective(a);
                if (val > last + 1e-14) {
                    last = val;
                    stalls = 0;
                } else if (++stalls >= 3) {
                    break;
                }
            }
        }
    };

    // exact solve over a candidate free set; bound variables stay where the
    // pattern puts them. Violating frees get pinned and the set shrinks.
    auto polish = [&](const std::vector<double>& start) {
        std::vector<double> pattern = start;
        std::vector<double> best = start;
        double best_val = objective(start);
        for (int round = 0; round < static_cast<int>(3 * n) + 8; ++round) {
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < n; ++i)
                if (pattern[i] > 1e-9 && pattern[i] < c - 1e-9) free.push_back(i);
            if (free.empty()) break;
            std::size_t m = free.size();
            auto is_free = [&](std::size_t i) {
                return std::find(free.begin(), free.end(), i) != free.end();
            };
            std::vector<std::vector<double>> sys(m + 1, std::vector<double>(m + 1, 0.0));
            std::vector<double> rhs(m + 1, 0.0);
            double bound_balance = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (!is_free(i)) bound_balance += data.y[i] * pattern[i];
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t s = 0; s < m; ++s) sys[r][s] = q[free[r]][free[s]];
                sys[r][m] = data.y[free[r]];
                sys[m][r] = data.y[free[r]];
                rhs[r] = 1.0;
                for (std::size_t i = 0; i < n; ++i)
                    if (!is_free(i)) rhs[r] -= q[free[r]][i] * pattern[i];
            }
            rhs[m] = -bound_balance;
            std::vector<double> sol;
            if (!solve_linear(sys, rhs, sol)) break;

            std::size_t worst = m;
            double excess = 1e-10;
            for (std::size_t r = 0; r < m; ++r) {
                double over = std::max(-sol[r], sol[r] - c);
                if (over > excess) {
                    excess = over;
                    worst = r;
                }
            }
            if (worst == m) {
                std::vector<double> trial = pattern;
                for (std::size_t r = 0; r < m; ++r)
                    trial[free[r]] = std::clamp(sol[r], 0.0, c);
                if (objective(trial) > best_val) {
                    best = trial;
                    best_val = objective(trial);
                }
                break;
            }
            pattern[free[worst]] = sol[worst] < 0.5 * c ? 0.0 : c;
        }
        return best;
    };

    std::vector<double> a(n, 0.0);
    a = project_feasible(a, data.y, c);
    double prev = -std::numeric_limits<double>::infinity();
    for (int outer = 0; outer < 16; ++outer) {
        pg_burst(a, outer == 0 ? 40000 : 8000);
        auto refined = polish(a);
        if (objective(refined) > objective(a)) a = refined;
        double cur = objective(a);
        if (cur - prev <= 1e-13 && outer > 0) break;
        prev = cur;
    }

    QpSolution out;
    out.alphas = a;
    out.dual_value = dual_objective(data, spec, out.alphas);
    return out;
}

void SvmModel::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) fail_io("cannot open model file for writing: " + path);
    auto kind_name = [&] {
        switch (kernel.kind) {
            case KernelKind::linear: return "linear";
            case KernelKind::polynomial: return "polynomial";
            case KernelKind::gaussian_rbf: return "gaussian_rbf";
            case KernelKind::sigmoid: return "sigmoid";
        }
        return "linear";
    }();
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    f << "ripplesense-svm v1\n";
    f << "kernel " << kind_name << "\n";
    f << "degree " << kernel.degree << "\n";
    f << "sigma " << fmt(kernel.sigma) << "\n";
    f << "gamma " << fmt(kernel.gamma) << "\n";
    f << "coef0 " << fmt(kernel.coef0) << "\n";
    f << "C " << fmt(c) << "\n";
    f << "bias " << fmt(bias) << "\n";
    f << "dim " << dim() << "\n";
    f << "nsv " << support_vectors.size() << "\n";
    f << "hysteresis " << fmt(hysteresis_hint) << "\n";
    f << "scaling " << (feature_offset.empty() ? 0 : 1) << "\n";
    if (!feature_offset.empty()) {
        f << "offset";
        for (double v : feature_offset) f << ' ' << fmt(v);
        f << "\nscale";
        for (double v : feature_scale) f << ' ' << fmt(v);
        f << '\n';
    }
    for (std::size_t i = 0; i < support_vectors.size(); ++i) {
        f << fmt(coeff[i]);
        for (double v : support_vectors[i]) f << ' ' << fmt(v);
        f << '\n';
    }
    if (!f) fail_io("write failure on model file: " + path);
}

SvmModel SvmModel::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail_io("cannot open model file: " + path);
    std::string line;
    int lineno = 0;
    auto next_line = [&]() {
        if (!std::getline(f, line)) fail_io(path + ": unexpected end of file at line " +
                                            std::to_string(lineno + 1));
        ++lineno;
    };
    next_line();
    if (line != "ripplesense-svm v1") fail_io(path + ": line 1: unrecognized model header");

    SvmModel m;
    std::size_t dim = 0, nsv = 0;
    auto expect_kv = [&](const std::string& key) {
        next_line();
        std::istringstream ss(line);
        std::string k;
        ss >> k;
        if (k != key) fail_io(path + ": line " + std::to_string(lineno) + ": expected '" + key + "'");
        return ss;
    };
    {
        auto ss = expect_kv("kernel");
        std::string kind;
        ss >> kind;
        if (kind == "linear") m.kernel.kind = KernelKind::linear;
        else if (kind == "polynomial") m.kernel.kind = KernelKind::polynomial;
        else if (kind == "gaussian_rbf") m.kernel.kind = KernelKind::gaussian_rbf;
        else if (kind == "sigmoid") m.kernel.kind = KernelKind::sigmoid;
        else fail_io(path + ": line " + std::to_string(lineno) + ": unknown kernel kind");
    }
    expect_kv("degree") >> m.kernel.degree;
    expect_kv("sigma") >> m.kernel.sigma;
    expect_kv("gamma") >> m.kernel.gamma;
    expect_kv("coef0") >> m.kernel.coef0;
    expect_kv("C") >> m.c;
    expect_kv("bias") >> m.bias;
    expect_kv("dim") >> dim;
    expect_kv("nsv") >> nsv;
    expect_kv("hysteresis") >> m.hysteresis_hint;
    int scaling = 0;
    expect_kv("scaling") >> scaling;
    if (scaling != 0) {
        auto read_row = [&](const std::string& key, std::vector<double>& out) {
            auto ss = expect_kv(key);
            out.resize(dim);
            for (std::size_t d = 0; d < dim; ++d)
                if (!(ss >> out[d]))
                    fail_io(path + ": line " + std::to_string(lineno) + ": bad " + key + " row");
        };
        read_row("offset", m.feature_offset);
        read_row("scale", m.feature_scale);
    }
    for (std::size_t i = 0; i < nsv; ++i) {
        next_line();
        std::istringstream ss(line);
        double coeff;
        if (!(ss >> coeff))
            fail_io(path + ": line " + std::to_string(lineno) + ": bad support vector row");
        std::vector<double> sv(dim);
        for (std::size_t d = 0; d < dim; ++d)
            if (!(ss >> sv[d]))
                fail_io(path + ": line " + std::to_string(lineno) + ": bad support vector row");
        m.coeff.push_back(coeff);
        m.support_vectors.push_back(std::move(sv));
    }
    return m;
}

}  // namespace ripple
