#pragma once
// User/content models and the interaction formulas driving the simulation:
// bimodal belief sampling, content bias per politics category, dissonance-
// driven opinion shift with attraction/repulsion, sigmoid click probability,
// and satisfaction-gated attrition.
//
// Everything here is a pure function of (state, params, RNG stream); no
// shared mutable state. Callers running in parallel must own their streams.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "beliefsim/rng.hpp"

namespace beliefsim {

inline constexpr int kNumCategories = 7;

// Satisfaction growth/decay rate bounds (fixed, not configurable).
inline constexpr double kRateMin = 1.01;
inline constexpr double kRateMax = 1.10;

/// Politics categories, integer codes 1..7 left to right.
enum class PoliticsCategory : int {
    FarLeft = 1,
    Left = 2,
    LeanLeft = 3,
    Center = 4,
    LeanRight = 5,
    Right = 6,
    FarRight = 7,
};

/// 0-based index of a category (FarLeft -> 0, ..., FarRight -> 6).
inline int category_index(PoliticsCategory c) {
    return static_cast<int>(c) - 1;
}

inline PoliticsCategory category_from_index(int idx) {
    if (idx < 0 || idx >= kNumCategories)
        throw std::invalid_argument("category index out of range: " + std::to_string(idx));
    return static_cast<PoliticsCategory>(idx + 1);
}

inline const char* category_name(PoliticsCategory c) {
    static constexpr std::array<const char*, 7> names = {
        "far_left", "left", "lean_left", "center", "lean_right", "right", "far_right"};
    return names[static_cast<size_t>(category_index(c))];
}

/// Bias interval covered by category k (code 1..7): [-1 + 2(k-1)/7, -1 + 2k/7].
/// The 7 intervals partition [-1, 1].
inline std::pair<double, double> category_interval(PoliticsCategory c) {
    const int k = static_cast<int>(c);
    return {-1.0 + 2.0 * (k - 1) / 7.0, -1.0 + 2.0 * k / 7.0};
}

/// Category whose interval contains `bias`. Boundary values go to the
/// lower-index category, except -1 -> FarLeft and +1 -> FarRight.
inline PoliticsCategory category_of_bias(double bias) {
    if (!(bias >= -1.0 && bias <= 1.0))
        throw std::invalid_argument("category_of_bias: bias outside [-1, 1]");
    for (int k = 1; k < kNumCategories; ++k) {
        if (bias <= -1.0 + 2.0 * k / 7.0) return static_cast<PoliticsCategory>(k);
    }
    return PoliticsCategory::FarRight;
}

struct Content {
    PoliticsCategory category = PoliticsCategory::Center;
    double bias = 0.0;  // c_b, inside the category's interval
};

struct BeliefDistributionParams {
    double mu_left = -0.5;
    double sigma_left = 0.25;
    double mu_right = 0.3;
    double sigma_right = 0.3;
    double p_left = 0.55;
    double resample_bound = 0.8;  // pseudo-truncation bound, in (0, 1]

    void validate() const {
        if (!(p_left >= 0.0 && p_left <= 1.0))
            throw std::invalid_argument("belief.p_left must be in [0, 1]");
        if (!(sigma_left > 0.0) || !(sigma_right > 0.0))
            throw std::invalid_argument("belief sigmas must be > 0");
        if (!(resample_bound > 0.0 && resample_bound <= 1.0))
            throw std::invalid_argument("belief.resample_bound must be in (0, 1]");
    }
};

enum class RateMode {
    PerInteraction,  // fresh U[1.01, 1.10] draw each satisfaction update
    PerUser,         // the rates stored on the user at creation
};

struct UserGenParams {
    double pf_min = 1.8;          // polarization factor ~ U[pf_min, pf_max]
    double pf_max = 2.2;
    double malleability = 1.0;    // constant u_m for every user
    double om_min = 0.4;          // open-mindedness ~ U[om_min, om_max]
    double om_max = 0.6;
    RateMode rate_mode = RateMode::PerInteraction;

    void validate() const {
        if (!(pf_min > 0.0) || !(pf_max >= pf_min))
            throw std::invalid_argument("user.pf_min/pf_max invalid (need 0 < pf_min <= pf_max)");
        if (!(malleability >= 0.0))
            throw std::invalid_argument("user.malleability must be >= 0");
        if (!(om_min > 0.0) || !(om_max >= om_min))
            throw std::invalid_argument("user.om_min/om_max invalid (need 0 < om_min <= om_max)");
    }
};

struct UserState {
    double belief = 0.0;              // u_b in [-1, 1]
    double polarization_factor = 2.0; // u_pf > 0
    double malleability = 1.0;        // u_m >= 0
    double open_mindedness = 0.5;     // u_om > 0
    double engagement = 0.0;          // u_e in [0, 1]
    double satisfaction = 1.0;        // in (0, 1]
    double growth_rate = 1.05;        // in [1.01, 1.10]
    double decay_rate = 1.05;         // in [1.01, 1.10]
    bool alive = true;
};

enum class SpreadMode { Exponent, Multiplier };

struct InteractionParams {
    double p_spread = 8.0;
    double p_max = 0.8;
    SpreadMode spread_mode = SpreadMode::Exponent;
    double satisfaction_threshold = 0.25;
    double engagement_increment = 0.05;
    double epsilon_div = 1e-8;
    RateMode rate_mode = RateMode::PerInteraction;

    void validate() const {
        if (!(p_max > 0.0 && p_max <= 1.0))
            throw std::invalid_argument("interact.p_max must be in (0, 1]");
        if (!(satisfaction_threshold >= 0.0 && satisfaction_threshold < 1.0))
            throw std::invalid_argument("interact.satisfaction_threshold must be in [0, 1)");
        if (!(engagement_increment > 0.0 && engagement_increment <= 1.0))
            throw std::invalid_argument("interact.engagement_increment must be in (0, 1]");
        if (!(p_spread > 0.0))
            throw std::invalid_argument("interact.p_spread must be > 0");
        if (!(epsilon_div > 0.0))
            throw std::invalid_argument("interact.epsilon_div must be > 0");
        if (spread_mode == SpreadMode::Multiplier && p_max * p_spread > 1.0)
            throw std::invalid_argument(
                "interact: multiplier mode requires p_max * p_spread <= 1");
    }
};

struct InteractionOutcome {
    bool clicked = false;
    bool attrited = false;
    double belief_shift = 0.0;
    double click_probability = 0.0;
};

/// Belief from the bimodal mixture: pick the left Gaussian with probability
/// p_left (else the right one), then resample within that Gaussian until
/// |b| <= resample_bound. Capped at 10,000 attempts so degenerate parameter
/// sets fail loudly instead of spinning. Also reports which component the
/// draw came from.
inline std::pair<double, bool> sample_user_belief_tagged(const BeliefDistributionParams& p,
                                                         RngStream& rng) {
    p.validate();
    const bool left = rng.bernoulli(p.p_left);
    const double mu = left ? p.mu_left : p.mu_right;
    const double sigma = left ? p.sigma_left : p.sigma_right;
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const double b = rng.normal(mu, sigma);
        if (std::abs(b) <= p.resample_bound) return {b, left};
    }
    throw std::runtime_error(
        "sample_user_belief: 10000 rejections; components carry no mass inside the bound");
}

inline double sample_user_belief(const BeliefDistributionParams& p, RngStream& rng) {
    return sample_user_belief_tagged(p, rng).first;
}

inline UserState create_user(const BeliefDistributionParams& belief_params,
                             const UserGenParams& gen, RngStream& rng) {
    gen.validate();
    UserState u;
    u.belief = sample_user_belief(belief_params, rng);
    u.polarization_factor = rng.uniform(gen.pf_min, gen.pf_max);
    u.malleability = gen.malleability;
    u.open_mindedness = rng.uniform(gen.om_min, gen.om_max);
    u.engagement = 0.0;
    u.satisfaction = 1.0;
    u.growth_rate = rng.uniform(kRateMin, kRateMax);
    u.decay_rate = rng.uniform(kRateMin, kRateMax);
    u.alive = true;
    return u;
}

/// Content with bias uniform over the category's interval.
inline Content sample_content(PoliticsCategory category, RngStream& rng) {
    const auto [lo, hi] = category_interval(category);
    return Content{category, rng.uniform(lo, hi)};
}

/// Dissonance d = c_b - u_b, in [-2, 2].
inline double dissonance(const UserState& user, const Content& content) {
    return content.bias - user.belief;
}

/// Damping of shifts pushing a user toward their own extreme:
/// 1 - u_b^2 when d(1-d^2) * u_b > 0, else 1.
inline double extremes_decay(const UserState& user, double d) {
    const double direction = d * (1.0 - d * d);
    return (direction * user.belief > 0.0) ? 1.0 - user.belief * user.belief : 1.0;
}

/// Belief update: shift = d(1-d^2)/u_pf^2 * u_m * u_e * e_d.
/// Small dissonance attracts, |d| > 1 repels. Returns (clamped new belief,
/// raw shift); the caller decides whether to commit.
inline std::pair<double, double> opinion_shift(const UserState& user, const Content& content) {
    const double d = dissonance(user, content);
    const double core = d * (1.0 - d * d) / (user.polarization_factor * user.polarization_factor);
    const double shift = core * user.malleability * user.engagement * extremes_decay(user, d);
    const double new_belief = std::clamp(user.belief + shift, -1.0, 1.0);
    return {new_belief, shift};
}

inline double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

/// Click probability from dissonance and open-mindedness, with
/// s = sigmoid(u_om / (|d| + epsilon_div)):
///   Exponent mode:   p_max * s^p_spread        (default; bell with thin tails)
///   Multiplier mode: p_max * p_spread * s      (requires p_max*p_spread <= 1)
/// Non-increasing in |d|; equals ~p_max at d = 0 in Exponent mode.
inline double click_probability(const UserState& user, const Content& content,
                                const InteractionParams& params) {
    const double absd = std::abs(dissonance(user, content));
    const double s = sigmoid(user.open_mindedness / (absd + params.epsilon_div));
    if (params.spread_mode == SpreadMode::Multiplier) {
        if (params.p_max * params.p_spread > 1.0)
            throw std::invalid_argument(
                "click_probability: multiplier mode requires p_max * p_spread <= 1");
        return params.p_max * params.p_spread * s;
    }
    return params.p_max * std::pow(s, params.p_spread);
}

inline UserState update_engagement(UserState user, bool clicked, const InteractionParams& params) {
    if (clicked) user.engagement = std::min(1.0, user.engagement + params.engagement_increment);
    return user;
}

/// Satisfaction update with explicit rates: grow (clamped to 1) on click,
/// decay otherwise.
inline UserState update_satisfaction(UserState user, bool clicked, double growth_rate,
                                     double decay_rate) {
    if (clicked)
        user.satisfaction = std::min(1.0, user.satisfaction * growth_rate);
    else
        user.satisfaction = user.satisfaction / decay_rate;
    return user;
}

/// Satisfaction update using the rates stored on the user.
inline UserState update_satisfaction(UserState user, bool clicked) {
    return update_satisfaction(user, clicked, user.growth_rate, user.decay_rate);
}

/// Attrition chance: 1 - satisfaction/threshold below the threshold, else 0.
inline double attrition_probability(const UserState& user, const InteractionParams& params) {
    if (user.satisfaction < params.satisfaction_threshold)
        return 1.0 - user.satisfaction / params.satisfaction_threshold;
    return 0.0;
}

/// One full user-content interaction. Fixed order:
///   1. click probability from the pre-interaction state
///   2. clicked ~ Bernoulli(p)
///   3. engagement update
///   4. opinion shift with post-click engagement, committed (shift happens on
///      every exposure, clicked or not)
///   5. satisfaction update (per-interaction rate draw in the default mode)
///   6. attrited ~ Bernoulli(attrition chance); attrition clears `alive`
/// RNG draws per call: click, rate (PerInteraction mode only), attrition.
inline std::pair<UserState, InteractionOutcome> interact(const UserState& user,
                                                         const Content& content,
                                                         const InteractionParams& params,
                                                         RngStream& rng) {
    if (!user.alive) throw std::logic_error("interact: user is not alive");
    InteractionOutcome out;
    out.click_probability = click_probability(user, content, params);
    out.clicked = rng.bernoulli(out.click_probability);

    UserState next = update_engagement(user, out.clicked, params);
    const auto [new_belief, shift] = opinion_shift(next, content);
    next.belief = new_belief;
    out.belief_shift = shift;

    if (params.rate_mode == RateMode::PerInteraction) {
        const double rate = rng.uniform(kRateMin, kRateMax);
        next = update_satisfaction(std::move(next), out.clicked, rate, rate);
    } else {
        next = update_satisfaction(std::move(next), out.clicked);
    }

    out.attrited = rng.bernoulli(attrition_probability(next, params));
    if (out.attrited) next.alive = false;
    return {next, out};
}

}  // namespace beliefsim
