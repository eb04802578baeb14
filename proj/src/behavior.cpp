#include "simobj/behavior.hpp"

#include <cmath>

#include "simobj/util.hpp"

namespace simobj {

void UserModel::validate() const {
  if (!(patience >= -1.0 && patience <= 1.0))
    throw ConfigError("patience " + fmt_full(patience) + " outside [-1, 1]");
  if (!(inclination >= -1.0 && inclination <= 1.0))
    throw ConfigError("inclination " + fmt_full(inclination) + " outside [-1, 1]");
}

std::vector<std::pair<std::string, UserModel>> personality_presets() {
  return {
      {"U1", UserModel{-0.9, -0.9, "U1"}},  // impatient and critical
      {"U2", UserModel{-0.9, 0.9, "U2"}},   // impatient and positive
      {"U3", UserModel{0.9, -0.9, "U3"}},   // patient and critical
      {"U4", UserModel{0.9, 0.9, "U4"}},    // patient and positive
      {"U5", UserModel{1e-5, 1e-5, "U5"}},  // neutral
  };
}

UserModel preset(const std::string& name) {
  for (const auto& [n, m] : personality_presets())
    if (n == name) return m;
  throw ConfigError("unknown personality preset '" + name + "'");
}

void OutcomeModel::validate() const {
  if (mode == LabelingMode::Threshold && !(tau > 0.0 && tau < 1.0))
    throw ConfigError("threshold tau " + fmt_full(tau) + " outside (0, 1)");
}

void OutcomeFeatures::validate() const {
  if (length < 1) throw ConfigError("dialogue length must be >= 1");
  if (!is_user_action(last_user))
    throw ConfigError(std::string("last user action must be Q or F, got ") +
                      to_string(last_user));
  if (!is_agent_action(last_agent))
    throw ConfigError(std::string("last agent action must be R or A, got ") +
                      to_string(last_agent));
}

std::optional<OutcomeFeatures> extract_features(const Dialogue& d) {
  OutcomeFeatures f;
  f.length = d.length();
  std::optional<ActionLabel> last_user, last_agent;
  for (const Turn& t : d.turns) {
    if (t.action == ActionLabel::Stop) continue;
    if (t.speaker == Speaker::User)
      last_user = t.action;
    else
      last_agent = t.action;
  }
  if (!last_user || !last_agent) return std::nullopt;
  f.last_user = *last_user;
  f.last_agent = *last_agent;
  return f;
}

double score(const UserModel& u, const OutcomeFeatures& f, const OutcomeModel& m) {
  double h = m.w1 * u.patience / static_cast<double>(f.length);
  if (f.last_user == ActionLabel::F) h += m.w2 * std::tanh(u.inclination);
  if (f.last_agent == ActionLabel::A) h += m.w3;
  return h;
}

double success_probability(const UserModel& u, const OutcomeFeatures& f, const OutcomeModel& m) {
  return 1.0 / (1.0 + std::exp(-score(u, f, m)));
}

bool assign_label(double f, const OutcomeModel& m, RandomStream* rng) {
  if (m.mode == LabelingMode::Threshold) return f >= m.tau;
  if (rng == nullptr) throw ConfigError("bernoulli labeling requires a random stream");
  return rng->next_unit() < f;
}

Corpus label_corpus(const Corpus& c, const UserModel& u, const OutcomeModel& m,
                    const LabelOptions& opt) {
  u.validate();
  m.validate();
  Corpus out = c;
  for (std::size_t i = 0; i < out.dialogues.size(); ++i) {
    Dialogue& d = out.dialogues[i];
    if (d.success && !opt.overwrite) continue;
    auto feats = extract_features(d);
    if (!feats) {
      if (opt.skip_invalid) continue;
      throw ValidationError("dialogue '" + d.id + "' lacks a user or agent turn");
    }
    double f = success_probability(u, *feats, m);
    if (m.mode == LabelingMode::Bernoulli) {
      RandomStream rng = RandomStream::derive(opt.seed, {i});
      d.success = assign_label(f, m, &rng);
    } else {
      d.success = assign_label(f, m, nullptr);
    }
  }
  return out;
}

}  // namespace simobj
