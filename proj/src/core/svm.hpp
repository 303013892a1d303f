#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace ripple {

enum class KernelKind { linear, polynomial, gaussian_rbf, sigmoid };

struct KernelSpec {
    KernelKind kind = KernelKind::polynomial;
    int degree = 3;        // polynomial; optimal below five
    double sigma = 1.0;    // RBF width
    double gamma = 1.0;    // sigmoid slope
    double coef0 = 0.0;    // sigmoid offset

    void validate() const;
};

double kernel(std::span<const double> a, std::span<const double> b, const KernelSpec& spec);

struct TrainingSet {
    std::vector<std::vector<double>> x;
    std::vector<int> y;  // +1 / -1

    void validate() const;
    std::size_t size() const { return x.size(); }
    std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
};

struct SvmModel {
    KernelSpec kernel;
    double c = 1.0;
    double bias = 0.0;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> coeff;  // alpha_i * y_i, one per support vector

    // optional per-dimension input standardization (empty = identity); when
    // set, support vectors are stored in the standardized space and inputs are
    // mapped before the kernel sum
    std::vector<double> feature_offset;
    std::vector<double> feature_scale;

    // comparator dead band the feature stream was trained with; < 0 when
    // unknown. Carried so a deployment can reproduce the training front end.
    double hysteresis_hint = -1.0;

    std::size_t dim() const { return support_vectors.empty() ? 0 : support_vectors.front().size(); }
    double decision_value(std::span<const double> x) const;
    int decide(std::span<const double> x) const;  // sign, ties resolve to +1

    void save(const std::string& path) const;
    static SvmModel load(const std::string& path);
};

struct SmoDiagnostics {
    int iterations = 0;
    double kkt_gap = 0.0;
    double dual_objective = 0.0;
    bool stalled = false;  // stopped at the floating-point progress floor
};

// Sequential minimal optimization on the soft-margin dual: repeatedly picks
// the maximally KKT-violating pair and solves the two-variable subproblem
// until the violation falls under tol. Throws on non-convergence with the
// diagnostics in the message.
SvmModel train_smo(const TrainingSet& data, const KernelSpec& spec, double c, double tol = 1e-3,
                   int max_passes = 100, SmoDiagnostics* diag = nullptr,
                   std::vector<double>* alphas_out = nullptr);

struct QpSolution {
    std::vector<double> alphas;
    double dual_value = 0.0;
};

// Dense projected-gradient reference solver for the same dual, refined with an
// exact free-set solve. Capped at 16 points; test oracle only.
QpSolution brute_force_qp(const TrainingSet& data, const KernelSpec& spec, double c);

// Dual objective of Eq-style soft-margin SVM at the given multipliers.
double dual_objective(const TrainingSet& data, const KernelSpec& spec,
                      std::span<const double> alphas);

}  // namespace ripple
