#include "creagen/divergence.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "creagen/ops.hpp"

namespace creagen {

namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const Distribution& p, const Distribution& q) {
    if (p.size() != q.size()) {
        throw std::invalid_argument("divergence: distributions of different lengths " + std::to_string(p.size()) +
                                    " and " + std::to_string(q.size()));
    }
}

void check_order(double alpha, const char* what) {
    if (!(alpha > 0.0) || alpha == 1.0) {
        throw std::invalid_argument(std::string(what) + ": alpha must be > 0 and != 1, got " + std::to_string(alpha));
    }
}

// sum_i p_i^a q_i^(1-a), with 0^a = 0 for p and q_i = 0 handled by pow.
double power_sum(const Distribution& p, const Distribution& q, double alpha) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        s += std::pow(p[i], alpha) * std::pow(q[i], 1.0 - alpha);
    }
    return s;
}

void check_logits(const Tensor& logits, const char* op) {
    if (logits.rank() != 2 || logits.dim(1) < 2) {
        throw std::invalid_argument(std::string(op) + ": logits must be [batch, K>=2], got " +
                                    shape_str(logits.shape()));
    }
}

Tensor reduce(const Tensor& per_batch_sum, std::size_t batch, Reduction r) {
    return r == Reduction::sum ? per_batch_sum : scale(per_batch_sum, 1.0 / static_cast<double>(batch));
}

}  // namespace

Distribution::Distribution(std::vector<double> probabilities) : p_(std::move(probabilities)) {
    if (p_.size() < 2) throw std::invalid_argument("distribution: need at least 2 classes");
    double s = 0.0;
    for (double v : p_) {
        if (!(v >= 0.0)) throw std::invalid_argument("distribution: negative or NaN entry");
        s += v;
    }
    if (std::fabs(s - 1.0) > 1e-9) {
        throw std::invalid_argument("distribution: entries sum to " + std::to_string(s));
    }
}

Distribution Distribution::uniform(std::size_t k) {
    return Distribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

Distribution Distribution::from_logits(std::span<const double> logits) {
    double mx = -kInf;
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - mx));
    for (auto& v : p) v /= z;
    return Distribution(std::move(p));
}

SMParams::SMParams(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    check_order(alpha, "sm params");
    if (beta == 1.0 || std::isnan(beta)) throw std::invalid_argument("sm params: beta must be != 1");
}

double sm_divergence(const Distribution& p, const Distribution& q, const SMParams& params) {
    check_pair(p, q);
    const double a = params.alpha(), b = params.beta();
    double s = power_sum(p, q, a);
    return (std::pow(s, (1.0 - b) / (1.0 - a)) - 1.0) / (b - 1.0);
}

double kl_divergence(const Distribution& p, const Distribution& q) {
    check_pair(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return kInf;
        s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

double renyi_divergence(const Distribution& p, const Distribution& q, double alpha) {
    check_pair(p, q);
    check_order(alpha, "renyi");
    return std::log(power_sum(p, q, alpha)) / (alpha - 1.0);
}

double tsallis_divergence(const Distribution& p, const Distribution& q, double alpha) {
    check_pair(p, q);
    check_order(alpha, "tsallis");
    return (power_sum(p, q, alpha) - 1.0) / (alpha - 1.0);
}

double bhattacharyya_divergence(const Distribution& p, const Distribution& q) {
    check_pair(p, q);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::sqrt(p[i] * q[i]);
    return -std::log(s);
}

SMLossKind SMLossKind::general(double alpha, double beta) {
    SMParams checked(alpha, beta);
    return {Tag::sm, checked.alpha(), checked.beta()};
}

SMLossKind SMLossKind::renyi(double alpha) {
    check_order(alpha, "renyi");
    return {Tag::renyi, alpha, 1.0};
}

SMLossKind SMLossKind::tsallis(double alpha) {
    check_order(alpha, "tsallis");
    return {Tag::tsallis, alpha, alpha};
}

std::string SMLossKind::describe() const {
    std::ostringstream os;
    switch (tag) {
        case Tag::sm: os << "sm(" << alpha << "," << beta << ")"; break;
        case Tag::kl: os << "kl"; break;
        case Tag::bhattacharyya: os << "bhattacharyya"; break;
        case Tag::renyi: os << "renyi(" << alpha << ")"; break;
        case Tag::tsallis: os << "tsallis(" << alpha << ")"; break;
    }
    return os.str();
}

Tensor mce_creativity_loss(const Tensor& logits, Reduction reduction) {
    check_logits(logits, "mce_creativity_loss");
    const double k = static_cast<double>(logits.dim(1));
    return reduce(scale(sum(log_softmax(logits, 1)), -1.0 / k), logits.dim(0), reduction);
}

Tensor can_creativity_loss(const Tensor& logits, Reduction reduction) {
    check_logits(logits, "can_creativity_loss");
    const double k = static_cast<double>(logits.dim(1));
    Tensor pos = scale(sum(log_sigmoid(logits)), 1.0 / k);
    Tensor negs = scale(sum(log_sigmoid(neg(logits))), (k - 1.0) / k);
    return reduce(neg(add(pos, negs)), logits.dim(0), reduction);
}

Tensor sm_creativity_loss(const Tensor& logits, const SMLossKind& kind, Reduction reduction) {
    check_logits(logits, "sm_creativity_loss");
    const std::size_t batch = logits.dim(0);
    const double k = static_cast<double>(logits.dim(1));
    if (kind.tag == SMLossKind::Tag::kl) {
        // KL(u || D) = -(1/K) sum_k log D_k - ln K
        Tensor per = add_scalar(scale(sum_axis(log_softmax(logits, 1), 1), -1.0 / k), -std::log(k));
        return reduce(sum(per), batch, reduction);
    }
    Tensor probs = clamp_min(softmax(logits, 1), kProbFloor);
    if (kind.tag == SMLossKind::Tag::bhattacharyya) {
        Tensor inner = scale(sum_axis(pow(probs, 0.5), 1), 1.0 / std::sqrt(k));
        return reduce(neg(sum(log(inner))), batch, reduction);
    }
    const double a = kind.alpha;
    check_order(a, "sm_creativity_loss");
    // sum_k u^a D_k^(1-a) with u = 1/K
    Tensor s = scale(sum_axis(pow(probs, 1.0 - a), 1), std::pow(k, -a));
    Tensor per;
    switch (kind.tag) {
        case SMLossKind::Tag::renyi: per = scale(log(s), 1.0 / (a - 1.0)); break;
        case SMLossKind::Tag::tsallis: per = scale(add_scalar(s, -1.0), 1.0 / (a - 1.0)); break;
        case SMLossKind::Tag::sm: {
            SMParams checked(a, kind.beta);
            const double b = checked.beta();
            per = scale(add_scalar(pow(s, (1.0 - b) / (1.0 - a)), -1.0), 1.0 / (b - 1.0));
            break;
        }
        default: throw std::logic_error("sm_creativity_loss: unhandled tag");
    }
    return reduce(sum(per), batch, reduction);
}

Tensor classification_loss(const Tensor& logits, std::span<const int> labels, Reduction reduction) {
    check_logits(logits, "classification_loss");
    const std::size_t batch = logits.dim(0), k = logits.dim(1);
    if (labels.size() != batch) {
        throw std::invalid_argument("classification_loss: " + std::to_string(labels.size()) + " labels for batch " +
                                    std::to_string(batch));
    }
    std::vector<double> onehot(batch * k, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
        if (labels[i] < 0 || labels[i] >= static_cast<int>(k)) {
            throw std::invalid_argument("classification_loss: label " + std::to_string(labels[i]) +
                                        " out of range [0," + std::to_string(k) + ")");
        }
        onehot[i * k + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    Tensor mask({batch, k}, std::move(onehot));
    return reduce(neg(sum(mul(log_softmax(logits, 1), mask))), batch, reduction);
}

}  // namespace creagen
