#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "creagen/tensor.hpp"

namespace creagen {

/// Probability vector over K >= 2 classes: non-negative entries summing to 1 (within 1e-9).
class Distribution {
   public:
    explicit Distribution(std::vector<double> probabilities);

    static Distribution uniform(std::size_t k);
    /// Softmax of a logit vector.
    static Distribution from_logits(std::span<const double> logits);

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    std::span<const double> probabilities() const { return p_; }

   private:
    std::vector<double> p_;
};

/// Sharma-Mittal order/degree pair. alpha > 0, alpha != 1, beta != 1; the
/// limit cases have their own named functions.
class SMParams {
   public:
    SMParams(double alpha, double beta);
    double alpha() const { return alpha_; }
    double beta() const { return beta_; }

   private:
    double alpha_;
    double beta_;
};

// Pure divergences. No clamping: diverging cases return +infinity.

/// SM_{a,b}(p||q) = 1/(b-1) * [ (sum_i p_i^a q_i^(1-a))^((1-b)/(1-a)) - 1 ].
///
/// The exponent applies to the whole sum and the pair is p^a q^(1-a). Putting
/// the exponent inside the sum, or swapping a and 1-a, breaks the Renyi,
/// Tsallis and KL limits, which this form reproduces.
double sm_divergence(const Distribution& p, const Distribution& q, const SMParams& params);
double kl_divergence(const Distribution& p, const Distribution& q);
double renyi_divergence(const Distribution& p, const Distribution& q, double alpha);
double tsallis_divergence(const Distribution& p, const Distribution& q, double alpha);
/// -ln sum_i sqrt(p_i q_i)
double bhattacharyya_divergence(const Distribution& p, const Distribution& q);

enum class Reduction { sum, mean };

/// Which divergence between the uniform prior u and the softmax D of the logits
/// the SM creativity loss evaluates. `sm` is the general two-parameter member;
/// the others are its limit cases.
struct SMLossKind {
    enum class Tag { sm, kl, bhattacharyya, renyi, tsallis };
    Tag tag = Tag::kl;
    double alpha = 0.5;
    double beta = 0.5;

    static SMLossKind general(double alpha, double beta);
    static SMLossKind kl() { return {Tag::kl, 1.0, 1.0}; }
    static SMLossKind bhattacharyya() { return {Tag::bhattacharyya, 0.5, 1.0}; }
    static SMLossKind renyi(double alpha);
    static SMLossKind tsallis(double alpha);

    std::string describe() const;
};

// Differentiable losses over logits [batch, K].

/// -sum_b sum_k (1/K) log softmax(logits)_k
Tensor mce_creativity_loss(const Tensor& logits, Reduction reduction = Reduction::sum);
/// -sum_b sum_k [ (1/K) log sigmoid(l_k) + ((K-1)/K) log(1 - sigmoid(l_k)) ]
Tensor can_creativity_loss(const Tensor& logits, Reduction reduction = Reduction::sum);
/// sum_b SM(u || softmax(logits)); probabilities are floored at 1e-12 inside
/// powers and logs.
Tensor sm_creativity_loss(const Tensor& logits, const SMLossKind& kind, Reduction reduction = Reduction::sum);
/// -sum_b log softmax(logits)_{label_b}
Tensor classification_loss(const Tensor& logits, std::span<const int> labels,
                           Reduction reduction = Reduction::sum);

}  // namespace creagen
