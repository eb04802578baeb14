#pragma once

// User traits (patience, inclination), the five personality presets, and
// the sigmoid outcome model that assigns binary success labels from
// dialogue length and final actions.
//
// All operations are pure; corpus labeling in bernoulli mode derives one
// stream per dialogue so it may be parallelized without changing results.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simobj/corpus.hpp"
#include "simobj/rng.hpp"

namespace simobj {

struct UserModel {
  double patience = 0.0;     // in [-1, 1]
  double inclination = 0.0;  // in [-1, 1]
  std::string name;

  void validate() const;  // ConfigError when a trait leaves the closed bounds
};

// The five presets: U1 impatient/critical, U2 impatient/positive,
// U3 patient/critical, U4 patient/positive, U5 neutral.
std::vector<std::pair<std::string, UserModel>> personality_presets();
UserModel preset(const std::string& name);  // ConfigError on unknown name

enum class LabelingMode { Threshold, Bernoulli };

struct OutcomeModel {
  double w1 = 1.0;
  double w2 = 1.0;
  double w3 = 0.5;
  LabelingMode mode = LabelingMode::Threshold;
  double tau = 0.5;  // threshold mode: success iff probability >= tau (inclusive)

  void validate() const;  // ConfigError when tau leaves (0,1) in threshold mode
};

struct OutcomeFeatures {
  std::size_t length = 1;                   // non-Stop turns, >= 1
  ActionLabel last_user = ActionLabel::Q;   // in {Q, F}
  ActionLabel last_agent = ActionLabel::R;  // in {R, A}

  void validate() const;
};

// Features from a dialogue's own turns: length and the last non-Stop action
// of each side. Empty when a side never acts.
std::optional<OutcomeFeatures> extract_features(const Dialogue& d);

// w1 * p / l + w2 * tanh(i) * [last_user == F] + w3 * [last_agent == A]
double score(const UserModel& u, const OutcomeFeatures& f, const OutcomeModel& m);

// Sigmoid of the score, strictly monotone, in (0, 1).
double success_probability(const UserModel& u, const OutcomeFeatures& f, const OutcomeModel& m);

// Threshold mode: success iff f >= tau, no draw. Bernoulli mode: success
// with probability f, consuming exactly one draw; ConfigError without a stream.
bool assign_label(double f, const OutcomeModel& m, RandomStream* rng);

struct LabelOptions {
  bool overwrite = false;     // replace pre-existing labels
  bool skip_invalid = false;  // dialogues lacking a side: skip instead of throwing
  std::uint64_t seed = 0;     // bernoulli mode: per-dialogue streams derive from this
};

// Returns a copy of the corpus with success labels assigned from each
// dialogue's own features. ValidationError for a dialogue lacking a user or
// agent turn unless skip_invalid is set.
Corpus label_corpus(const Corpus& c, const UserModel& u, const OutcomeModel& m,
                    const LabelOptions& opt = {});

}  // namespace simobj
