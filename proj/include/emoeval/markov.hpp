#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "emoeval/emotion.hpp"

namespace emoeval {

/// Raw transition counts f_ij over a state space; the total equals the number
/// of observed transitions T.
class TransitionCounts {
public:
    explicit TransitionCounts(std::vector<std::vector<std::int64_t>> counts)
        : counts_(std::move(counts)) {
        const std::size_t n = counts_.size();
        if (n == 0) throw std::invalid_argument("TransitionCounts: empty matrix");
        for (const auto& row : counts_) {
            if (row.size() != n)
                throw std::invalid_argument("TransitionCounts: matrix must be square");
            for (std::int64_t c : row) {
                if (c < 0) throw std::invalid_argument("TransitionCounts: negative count");
                total_ += c;
            }
        }
    }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(counts_.size()); }

    /// f_ij, 1-based.
    [[nodiscard]] std::int64_t at(int i, int j) const {
        return counts_[index(i)][index(j)];
    }

    [[nodiscard]] std::int64_t row_sum(int i) const {
        std::int64_t sum = 0;
        for (std::int64_t c : counts_[index(i)]) sum += c;
        return sum;
    }

    [[nodiscard]] std::int64_t total() const noexcept { return total_; }

private:
    [[nodiscard]] std::size_t index(int i) const {
        if (i < 1 || i > size()) throw std::out_of_range("TransitionCounts: index out of range");
        return static_cast<std::size_t>(i - 1);
    }

    std::vector<std::vector<std::int64_t>> counts_;
    std::int64_t total_ = 0;
};

/// f_ij = |{t in 1..T : s_{t-1} in bin i and s_t in bin j}|.
inline TransitionCounts count_transitions(const EmotionTrajectory& traj,
                                          const StateSpace& space) {
    const std::size_t n = static_cast<std::size_t>(space.size());
    std::vector<std::vector<std::int64_t>> counts(n, std::vector<std::int64_t>(n, 0));
    for (int t = 1; t <= traj.turns(); ++t) {
        const int from = space.discretize(traj.at(t - 1));
        const int to = space.discretize(traj.at(t));
        ++counts[static_cast<std::size_t>(from - 1)][static_cast<std::size_t>(to - 1)];
    }
    return TransitionCounts(std::move(counts));
}

/// Row-stochastic transition probabilities with per-row defined mask. A row
/// is undefined when its state was never observed as a source; such rows
/// carry no probabilities and read back as zero.
class TransitionMatrix {
public:
    TransitionMatrix(std::vector<std::vector<double>> probabilities,
                     std::vector<bool> row_defined)
        : probabilities_(std::move(probabilities)), row_defined_(std::move(row_defined)) {
        const std::size_t n = probabilities_.size();
        if (n == 0) throw std::invalid_argument("TransitionMatrix: empty matrix");
        if (row_defined_.size() != n)
            throw std::invalid_argument("TransitionMatrix: mask size mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            if (probabilities_[i].size() != n)
                throw std::invalid_argument("TransitionMatrix: matrix must be square");
            if (!row_defined_[i]) {
                for (double& p : probabilities_[i]) p = 0.0;
                continue;
            }
            double sum = 0.0;
            for (double p : probabilities_[i]) {
                if (!std::isfinite(p) || p < 0.0 || p > 1.0)
                    throw std::invalid_argument(
                        "TransitionMatrix: probabilities must lie in [0, 1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("TransitionMatrix: defined row must sum to 1");
        }
    }

    static TransitionMatrix identity(int n) {
        std::vector<std::vector<double>> probs(static_cast<std::size_t>(n),
                                               std::vector<double>(static_cast<std::size_t>(n), 0.0));
        for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) probs[i][i] = 1.0;
        return TransitionMatrix(std::move(probs), std::vector<bool>(static_cast<std::size_t>(n), true));
    }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(probabilities_.size()); }

    [[nodiscard]] bool row_defined(int i) const { return row_defined_[index(i)]; }

    [[nodiscard]] int defined_row_count() const noexcept {
        int count = 0;
        for (bool d : row_defined_) count += d ? 1 : 0;
        return count;
    }

    /// m_ij, 1-based; zero for undefined rows.
    [[nodiscard]] double at(int i, int j) const {
        return probabilities_[index(i)][index(j)];
    }

private:
    [[nodiscard]] std::size_t index(int i) const {
        if (i < 1 || i > size()) throw std::out_of_range("TransitionMatrix: index out of range");
        return static_cast<std::size_t>(i - 1);
    }

    std::vector<std::vector<double>> probabilities_;
    std::vector<bool> row_defined_;
};

/// Maximum-likelihood estimate: m_ij = f_ij / sum_k f_ik. Rows with zero
/// row sum stay undefined; they are a legal state, never imputed.
inline TransitionMatrix mle_normalize(const TransitionCounts& counts) {
    const int n = counts.size();
    std::vector<std::vector<double>> probs(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(n), 0.0));
    std::vector<bool> defined(static_cast<std::size_t>(n), false);
    for (int i = 1; i <= n; ++i) {
        const std::int64_t row_sum = counts.row_sum(i);
        if (row_sum == 0) continue;
        defined[static_cast<std::size_t>(i - 1)] = true;
        for (int j = 1; j <= n; ++j)
            probs[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] =
                static_cast<double>(counts.at(i, j)) / static_cast<double>(row_sum);
    }
    return TransitionMatrix(std::move(probs), std::move(defined));
}

/// Empirical probability that a transition begins in each state: p_i = N_i / T.
class SourceDistribution {
public:
    explicit SourceDistribution(std::vector<double> probabilities)
        : probabilities_(std::move(probabilities)) {
        if (probabilities_.empty())
            throw std::invalid_argument("SourceDistribution: empty distribution");
        double sum = 0.0;
        for (double p : probabilities_) {
            if (!std::isfinite(p) || p < 0.0)
                throw std::invalid_argument("SourceDistribution: probabilities must be >= 0");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("SourceDistribution: probabilities must sum to 1");
    }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(probabilities_.size()); }

    [[nodiscard]] double at(int i) const {
        if (i < 1 || i > size())
            throw std::out_of_range("SourceDistribution: index out of range");
        return probabilities_[static_cast<std::size_t>(i - 1)];
    }

private:
    std::vector<double> probabilities_;
};

inline SourceDistribution source_distribution(const TransitionCounts& counts) {
    if (counts.total() == 0)
        throw std::invalid_argument("source_distribution: no transitions observed");
    std::vector<double> probs(static_cast<std::size_t>(counts.size()));
    for (int i = 1; i <= counts.size(); ++i)
        probs[static_cast<std::size_t>(i - 1)] =
            static_cast<double>(counts.row_sum(i)) / static_cast<double>(counts.total());
    return SourceDistribution(std::move(probs));
}

/// State-importance weight for the volatility metric. The pairwise matrix
/// form uses w(e) = 1 - e; the per-step empirical form folds in the 1/T
/// sequence average, w(s) = (1 - s) / T.
class EtvWeight {
public:
    enum class Form { MatrixForm, EmpiricalForm };

    static EtvWeight matrix_form() {
        return EtvWeight(Form::MatrixForm, [](double e) { return 1.0 - e; });
    }

    static EtvWeight empirical_form(int turns) {
        if (turns < 1) throw std::invalid_argument("EtvWeight: turns must be >= 1");
        return EtvWeight(Form::EmpiricalForm,
                         [turns](double s) { return (1.0 - s) / static_cast<double>(turns); });
    }

    static EtvWeight custom(Form form, std::function<double(double)> fn) {
        return EtvWeight(form, std::move(fn));
    }

    [[nodiscard]] double operator()(double score) const {
        const double w = fn_(score);
        if (!std::isfinite(w) || w < 0.0)
            throw std::invalid_argument("EtvWeight: weight must be finite and >= 0");
        return w;
    }

    [[nodiscard]] Form form() const noexcept { return form_; }

private:
    EtvWeight(Form form, std::function<double(double)> fn) : form_(form), fn_(std::move(fn)) {}

    Form form_;
    std::function<double(double)> fn_;
};

/// Expected (source, target) emotion position of one transition.
struct Centroid {
    EmotionScore x;
    EmotionScore y;
};

/// Mean emotion over s_1..s_T; s_0 is excluded.
inline EmotionScore bel(const EmotionTrajectory& traj) {
    double sum = 0.0;
    for (int t = 1; t <= traj.turns(); ++t) sum += traj.at(t).value();
    double mean = sum / traj.turns();
    // convex combination of [0,1] values; guard rounding at the edges
    mean = std::min(std::max(mean, 0.0), 1.0);
    return EmotionScore(mean);
}

/// Per-step contributions w(s_{t-1}) * (s_t - s_{t-1}) with w(s) = (1-s)/T,
/// index t-1 in the result. Their sum is the empirical volatility.
inline std::vector<double> etv_step_contributions(const EmotionTrajectory& traj) {
    const EtvWeight weight = EtvWeight::empirical_form(traj.turns());
    std::vector<double> steps;
    steps.reserve(static_cast<std::size_t>(traj.turns()));
    for (int t = 1; t <= traj.turns(); ++t) {
        const double from = traj.at(t - 1).value();
        const double to = traj.at(t).value();
        steps.push_back(weight(from) * (to - from));
    }
    return steps;
}

/// Volatility computed directly on the observed sequence, the canonical
/// reporting form under data sparsity.
inline double etv_empirical(const EmotionTrajectory& traj) {
    double sum = 0.0;
    for (double step : etv_step_contributions(traj)) sum += step;
    return sum;
}

/// Pairwise net-upward-advantage form over a transition matrix:
/// sum over i < j of w(e_i) * (e_j - e_i) * (m_ij - m_ji). Entries of
/// undefined rows contribute zero, which keeps this form consistent with the
/// per-observation empirical rewrite (the final observed state never occurs
/// as a source, yet its incoming transition still counts).
inline double etv_matrix(const TransitionMatrix& matrix, const StateSpace& space,
                         const EtvWeight& weight) {
    if (matrix.size() != space.size())
        throw std::invalid_argument("etv_matrix: matrix and state space sizes differ");
    if (matrix.defined_row_count() == 0)
        throw std::invalid_argument("etv_matrix: all rows undefined");
    double sum = 0.0;
    for (int i = 1; i <= matrix.size(); ++i) {
        for (int j = i + 1; j <= matrix.size(); ++j) {
            if (!matrix.row_defined(i) && !matrix.row_defined(j)) continue;
            const double e_i = space.representative(i);
            const double e_j = space.representative(j);
            sum += weight(e_i) * (e_j - e_i) * (matrix.at(i, j) - matrix.at(j, i));
        }
    }
    return sum;
}

/// Centroid of the transition distribution induced by the source
/// distribution and transition matrix: C_x = E[s_{t-1}], C_y = E[s_t].
inline Centroid ecp_matrix(const TransitionMatrix& matrix, const SourceDistribution& source,
                           const StateSpace& space) {
    if (matrix.size() != space.size() || source.size() != space.size())
        throw std::invalid_argument("ecp_matrix: size mismatch");
    double cx = 0.0;
    double cy = 0.0;
    for (int i = 1; i <= space.size(); ++i) {
        const double p_i = source.at(i);
        if (p_i == 0.0) continue;
        if (!matrix.row_defined(i))
            throw std::invalid_argument(
                "ecp_matrix: source state " + std::to_string(i) + " has an undefined row");
        cx += space.representative(i) * p_i;
        for (int j = 1; j <= space.size(); ++j)
            cy += space.representative(j) * matrix.at(i, j) * p_i;
    }
    cx = std::min(std::max(cx, 0.0), 1.0);
    cy = std::min(std::max(cy, 0.0), 1.0);
    return Centroid{EmotionScore(cx), EmotionScore(cy)};
}

/// Centroid computed directly from the observed transitions; the matrix form
/// above must agree with this numerically.
inline Centroid ecp_empirical(const EmotionTrajectory& traj, const StateSpace& space) {
    double cx = 0.0;
    double cy = 0.0;
    for (int t = 1; t <= traj.turns(); ++t) {
        cx += space.representative(space.discretize(traj.at(t - 1)));
        cy += space.representative(space.discretize(traj.at(t)));
    }
    cx = std::min(std::max(cx / traj.turns(), 0.0), 1.0);
    cy = std::min(std::max(cy / traj.turns(), 0.0), 1.0);
    return Centroid{EmotionScore(cx), EmotionScore(cy)};
}

}  // namespace emoeval
