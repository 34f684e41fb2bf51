#pragma once

// Seeded generators for the standard synthetic question banks.
//
// Every question has M meanings with S surface spellings each. Two archetypes
// are mixed per profile:
//   confident  most mass on boxed answers, a clear modal meaning
//   diffuse    most mass on unboxed rambling spread over many distinct
//              outputs, answers spread nearly evenly over meanings
// A question is modal-correct when its most likely meaning is the correct one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "empo/policy_sim.hpp"
#include "empo/rng.hpp"

namespace empo {

struct BankProfile {
  std::string name;
  std::size_t questions = 200;
  std::size_t meanings = 5;
  std::size_t surfaces = 2;
  // Archetype fractions; they sum to 1.
  double confident_correct = 0.0;
  double confident_wrong = 0.0;
  double diffuse_correct = 0.0;
  double diffuse_wrong = 0.0;
};

inline std::vector<BankProfile> standard_profiles() {
  return {
      {"modal-correct-70", 200, 5, 2, 0.7, 0.0, 0.0, 0.3},
      {"modal-correct-100", 200, 5, 2, 1.0, 0.0, 0.0, 0.0},
      {"modal-wrong-100", 200, 5, 2, 0.0, 0.5, 0.0, 0.5},
  };
}

inline std::optional<BankProfile> find_profile(const std::string& name) {
  for (auto& p : standard_profiles()) {
    if (p.name == name) return p;
  }
  return std::nullopt;
}

namespace bank_detail {

inline constexpr std::size_t kConfidentUnparseable = 4;
inline constexpr std::size_t kDiffuseUnparseable = 96;
inline constexpr double kModalMargin = 0.15;
// Share of a confident question's unparseable mass on its single looping draft.
inline constexpr double kLoopShare = 0.7;

struct Value {
  long long num;
  long long den;  // 1 for integers

  bool operator<(const Value& o) const { return num * o.den < o.num * den; }
};

inline Value random_value(Rng& rng) {
  if (rng.uniform() < 0.6) return {static_cast<long long>(2 + rng.below(400)), 1};
  for (;;) {
    long long den = 2 + static_cast<long long>(rng.below(8));
    long long num = 1 + static_cast<long long>(rng.below(static_cast<std::uint64_t>(4 * den)));
    if (std::gcd(num, den) == 1) return {num, den};
  }
}

inline bool terminates_in_decimal(long long den) {
  while (den % 2 == 0) den /= 2;
  while (den % 5 == 0) den /= 5;
  return den == 1;
}

inline std::string decimal_string(long long num, long long den) {
  // den divides a power of ten here.
  long long scale = 1;
  int digits = 0;
  while (scale % den != 0) {
    scale *= 10;
    ++digits;
  }
  long long scaled = num * (scale / den);
  std::string frac = std::to_string(scaled % scale);
  frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
  return std::to_string(scaled / scale) + "." + frac;
}

inline std::vector<std::string> spellings(const Value& v) {
  const std::string n = std::to_string(v.num);
  if (v.den == 1) {
    return {n, n + ".0", "+" + n, "0" + n, "\\text{" + n + "}", "$" + n + "$", n + ".00"};
  }
  const std::string d = std::to_string(v.den);
  std::vector<std::string> out = {
      n + "/" + d,
      "\\frac{" + n + "}{" + d + "}",
      "\\dfrac{" + n + "}{" + d + "}",
      std::to_string(2 * v.num) + "/" + std::to_string(2 * v.den),
      " " + n + " / " + d + " ",
  };
  if (terminates_in_decimal(v.den)) out.push_back(decimal_string(v.num, v.den));
  return out;
}

inline std::string canonical_of(const Value& v) {
  return v.den == 1 ? std::to_string(v.num)
                    : std::to_string(v.num) + "/" + std::to_string(v.den);
}

enum class Archetype { Confident, Diffuse };

// Meaning masses with the modal meaning at index 0.
inline std::vector<double> meaning_masses(Archetype a, std::size_t m, Rng& rng) {
  std::vector<double> w(m);
  if (a == Archetype::Confident) {
    const double modal = rng.uniform(0.40, 0.60);
    double rest = 0.0;
    for (std::size_t j = 1; j < m; ++j) rest += (w[j] = rng.uniform(0.2, 1.0));
    for (std::size_t j = 1; j < m; ++j) w[j] *= (1.0 - modal) / rest;
    w[0] = modal;
    // Keep a margin over the runner-up.
    const double runner = *std::max_element(w.begin() + 1, w.end());
    if (runner > modal - kModalMargin) {
      const double excess = runner - (modal - kModalMargin);
      auto it = std::max_element(w.begin() + 1, w.end());
      *it -= excess;
      for (std::size_t j = 1; m > 2 && j < m; ++j) {
        if (w.begin() + static_cast<std::ptrdiff_t>(j) != it) {
          w[j] += excess / static_cast<double>(m - 2);
        }
      }
    }
  } else {
    double top = 0.0;
    for (std::size_t j = 1; j < m; ++j) top = std::max(top, w[j] = rng.uniform(0.6, 1.0));
    w[0] = top * 1.6;
  }
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= z;
  return w;
}

// The modal meaning is spread over its spellings more evenly than the others.
inline std::vector<double> surface_shares(std::size_t s, bool modal, Rng& rng) {
  std::vector<double> share(s);
  if (s == 1) return {1.0};
  // One leading spelling, the rest split what remains.
  const double lead = modal ? rng.uniform(0.5, 0.6) : rng.uniform(0.75, 0.95);
  double rest = 0.0;
  for (std::size_t k = 1; k < s; ++k) rest += (share[k] = rng.uniform(0.5, 1.0));
  for (std::size_t k = 1; k < s; ++k) share[k] *= (1.0 - lead) / rest;
  share[0] = lead;
  rng.shuffle(share);
  return share;
}

inline std::string unparseable_text(std::size_t qi, std::size_t k) {
  static const char* const kStems[] = {
      "Let me reconsider the setup; the last computation does not match.",
      "Trying a different substitution, but the expression keeps growing.",
      "I am not certain which case applies here, so let me restart.",
      "The previous step seems wrong. Recomputing the sum from the beginning",
  };
  return std::string(kStems[k % 4]) + " (q" + std::to_string(qi) + ", draft " +
         std::to_string(k) + ")";
}

}  // namespace bank_detail

/// Builds the bank for `profile` from `seed`. Deterministic.
inline Bank generate_bank(const BankProfile& profile, std::uint64_t seed) {
  using namespace bank_detail;
  if (profile.meanings < 2 || profile.surfaces < 1 || profile.questions < 1) {
    throw std::invalid_argument("bank profile needs >= 2 meanings, >= 1 surface, >= 1 question");
  }
  Rng rng(seed);
  const std::size_t n = profile.questions;
  struct Kind {
    Archetype archetype;
    bool modal_correct;
  };
  std::vector<Kind> kinds;
  auto add = [&](double frac, Archetype a, bool correct) {
    auto count = static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
    for (std::size_t i = 0; i < count && kinds.size() < n; ++i) kinds.push_back({a, correct});
  };
  add(profile.confident_correct, Archetype::Confident, true);
  add(profile.confident_wrong, Archetype::Confident, false);
  add(profile.diffuse_correct, Archetype::Diffuse, true);
  add(profile.diffuse_wrong, Archetype::Diffuse, false);
  while (kinds.size() < n) kinds.push_back(kinds.empty() ? Kind{Archetype::Confident, true} : kinds.back());
  rng.shuffle(kinds);

  Bank bank;
  bank.reserve(n);
  for (std::size_t qi = 0; qi < n; ++qi) {
    const Kind kind = kinds[qi];
    SyntheticQuestion q;
    char id[32];
    std::snprintf(id, sizeof id, "q%04zu", qi);
    q.question_id = id;
    q.prompt = "Synthetic question " + q.question_id + ". Put the final answer in \\boxed{}.";

    std::set<Value> used;
    std::vector<Value> values;
    while (values.size() < profile.meanings) {
      Value v = random_value(rng);
      if (used.insert(v).second) values.push_back(v);
    }
    auto masses = meaning_masses(kind.archetype, profile.meanings, rng);
    // Place the modal meaning at a random position.
    const std::size_t modal_pos = static_cast<std::size_t>(rng.below(profile.meanings));
    std::swap(masses[0], masses[modal_pos]);
    std::size_t correct = modal_pos;
    if (!kind.modal_correct) {
      // The runner-up meaning is the correct one.
      correct = modal_pos == 0 ? 1 : 0;
      for (std::size_t m = 0; m < profile.meanings; ++m) {
        if (m != modal_pos && masses[m] > masses[correct]) correct = m;
      }
    }
    q.correct_meaning = correct;

    const bool diffuse = kind.archetype == Archetype::Diffuse;
    const double garbage = diffuse ? rng.uniform(0.89, 0.93) : rng.uniform(0.10, 0.35);
    const std::size_t n_garbage = diffuse ? kDiffuseUnparseable : kConfidentUnparseable;

    for (std::size_t m = 0; m < profile.meanings; ++m) {
      Meaning meaning;
      meaning.canonical = canonical_of(values[m]);
      auto options = spellings(values[m]);
      rng.shuffle(options);
      for (std::size_t s = 0; s < profile.surfaces; ++s) {
        meaning.surfaces.push_back(options[s % options.size()]);
      }
      auto shares = surface_shares(profile.surfaces, m == modal_pos, rng);
      for (std::size_t s = 0; s < profile.surfaces; ++s) {
        q.init_logits.push_back(std::log((1.0 - garbage) * masses[m] * shares[s]));
      }
      q.meanings.push_back(std::move(meaning));
    }
    std::vector<double> gw(n_garbage);
    double gz = 0.0;
    for (double& x : gw) gz += (x = rng.uniform(0.8, 1.2));
    if (!diffuse) {
      // One draft loops and dominates the unparseable mass.
      gz -= gw[0];
      for (double& x : gw) x *= (1.0 - kLoopShare) / gz;
      gw[0] = kLoopShare;
      gz = 1.0;
    }
    for (std::size_t k = 0; k < n_garbage; ++k) {
      q.unparseable.push_back(unparseable_text(qi, k));
      q.init_logits.push_back(std::log(garbage * gw[k] / gz + 1e-12));
    }
    bank.push_back(std::move(q));
  }
  validate_bank(bank);
  return bank;
}

}  // namespace empo
