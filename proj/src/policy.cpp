#include "simobj/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "simobj/util.hpp"

namespace simobj {

using json = nlohmann::ordered_json;

namespace {
constexpr double kRowTolerance = 1e-9;
}

std::optional<Condition> Condition::parse(const std::string& s) {
  if (s == "START") return start();
  if (auto a = parse_action(s); a && *a != ActionLabel::Stop) return on(*a);
  return std::nullopt;
}

std::string Condition::str() const { return is_start() ? "START" : to_string(*action_); }

bool Condition::operator<(const Condition& o) const {
  if (is_start() != o.is_start()) return is_start();
  if (is_start()) return false;
  return str() < o.str();  // labels alphabetically
}

std::vector<ActionLabel> side_outcomes(Speaker side) {
  if (side == Speaker::User) return {ActionLabel::Q, ActionLabel::F, ActionLabel::Stop};
  return {ActionLabel::R, ActionLabel::A, ActionLabel::Stop};
}

namespace {

// Canonical outcome order: QRFA enum order with Stop last.
bool outcome_less(ActionLabel a, ActionLabel b) {
  return static_cast<int>(a) < static_cast<int>(b);
}

std::vector<ActionLabel> sorted_vocabulary(std::set<ActionLabel> s) {
  std::vector<ActionLabel> v(s.begin(), s.end());
  std::sort(v.begin(), v.end(), outcome_less);
  return v;
}

}  // namespace

void ConditionalPolicy::validate() const {
  if (table.empty()) throw ValidationError("policy has no rows");
  for (const auto& [cond, row] : table) {
    if (row.empty()) throw ValidationError("policy row '" + cond.str() + "' is empty");
    double sum = 0.0;
    for (const auto& [a, p] : row) {
      if (a != ActionLabel::Stop && speaker_matches(side, a) == false)
        throw ValidationError("policy row '" + cond.str() + "' holds off-side action " +
                              to_string(a));
      if (!(p >= 0.0))
        throw ValidationError("policy row '" + cond.str() + "' has negative probability for " +
                              to_string(a));
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance)
      throw ValidationError("policy row '" + cond.str() + "' sums to " + fmt_full(sum) +
                            ", expected 1");
    if (!cond.is_start() && speaker_matches(side, cond.action()))
      throw ValidationError("policy row '" + cond.str() +
                            "' conditions on the policy's own side");
  }
  for (ActionLabel a : vocabulary)
    if (a != ActionLabel::Stop && !speaker_matches(side, a))
      throw ValidationError(std::string("vocabulary holds off-side action ") + to_string(a));
}

void PolicyPair::validate() const {
  if (agent.side != Speaker::Agent) throw ConfigError("agent policy has side 'user'");
  if (user.side != Speaker::User) throw ConfigError("user policy has side 'agent'");
  agent.validate();
  user.validate();
  if (!policy_for(opener).table.count(Condition::start()))
    throw ConfigError(std::string("opener policy (") + to_string(opener) +
                      ") lacks a START row");
}

ConditionalPolicy estimate_policy(const Corpus& c, Speaker side, const EstimateOptions& opt) {
  if (opt.smoothing < 0.0) throw ConfigError("negative pseudo-count");

  std::map<Condition, std::map<ActionLabel, double>> counts;
  std::optional<Speaker> opener;

  for (const Dialogue& d : c.dialogues) {
    if (!opener && !d.turns.empty()) opener = d.turns.front().speaker;
    std::optional<ActionLabel> last_action[2];  // indexed by Speaker
    for (const Turn& t : d.turns) {
      auto partner_last = last_action[static_cast<int>(opposite(t.speaker))];
      Condition cond = partner_last ? Condition::on(*partner_last) : Condition::start();
      if (t.speaker == side) counts[cond][t.action] += 1.0;
      if (t.action != ActionLabel::Stop) last_action[static_cast<int>(t.speaker)] = t.action;
    }
    // A dialogue that trails off without an explicit Stop: the side that
    // would have acted next transitions to Stop on the last action.
    const Turn& last = d.turns.back();
    if (last.action != ActionLabel::Stop) {
      if (opposite(last.speaker) == side) counts[Condition::on(last.action)][ActionLabel::Stop] += 1.0;
      if (opt.credit_final_responder_stop && last.speaker == side) {
        auto partner_last = last_action[static_cast<int>(opposite(side))];
        if (partner_last) counts[Condition::on(*partner_last)][ActionLabel::Stop] += 1.0;
      }
    }
  }

  if (counts.empty())
    throw ValidationError(std::string("no observations for side '") + to_string(side) + "'");

  ConditionalPolicy p;
  p.side = side;
  p.opener = opener;
  p.vocabulary = side_outcomes(side);
  for (const auto& [cond, row_counts] : counts) {
    double total = 0.0;
    for (const auto& [a, n] : row_counts) total += n;
    PolicyRow row;
    double denom = total + opt.smoothing * static_cast<double>(p.vocabulary.size());
    for (ActionLabel a : p.vocabulary) {
      auto it = row_counts.find(a);
      double n = it == row_counts.end() ? 0.0 : it->second;
      row[a] = (n + opt.smoothing) / denom;
    }
    p.table[cond] = std::move(row);
    p.condition_weights[cond] = total;
  }
  p.validate();
  return p;
}

ActionLabel sample_next(const ConditionalPolicy& p, const Condition& cond, RandomStream& rng) {
  auto it = p.table.find(cond);
  if (it == p.table.end()) throw ConfigError("unknown condition '" + cond.str() + "'");
  // Row maps iterate in canonical outcome order, so one cumulative walk per
  // draw is reproducible.
  double u = rng.next_unit();
  double cum = 0.0;
  for (const auto& [a, prob] : it->second) {
    cum += prob;
    if (u < cum) return a;
  }
  return it->second.rbegin()->first;  // guards the 1e-9 normalization slack
}

namespace {

std::vector<double> aligned_probs(const PolicyRow& row, const std::vector<ActionLabel>& outcomes) {
  std::vector<double> v;
  v.reserve(outcomes.size());
  for (ActionLabel a : outcomes) {
    auto it = row.find(a);
    v.push_back(it == row.end() ? 0.0 : it->second);
  }
  return v;
}

AlignedRows align_on(const ConditionalPolicy& p, const std::vector<ActionLabel>& outcomes,
                     std::vector<Condition> conditions) {
  std::sort(conditions.begin(), conditions.end());
  AlignedRows out;
  for (ActionLabel a : outcomes) out.outcome_labels.push_back(to_string(a));
  for (const Condition& cond : conditions) {
    auto it = p.table.find(cond);
    if (it == p.table.end())
      throw ValidationError("requested condition missing: '" + cond.str() + "'");
    out.rows.emplace_back(cond, aligned_probs(it->second, outcomes));
  }
  return out;
}

}  // namespace

AlignedRows policy_rows_as_distributions(const ConditionalPolicy& p,
                                         const std::vector<Condition>& conditions) {
  std::vector<ActionLabel> outcomes =
      p.vocabulary.empty() ? side_outcomes(p.side) : p.vocabulary;
  return align_on(p, outcomes, conditions);
}

std::pair<AlignedRows, AlignedRows> align_policies(const ConditionalPolicy& a,
                                                   const ConditionalPolicy& b,
                                                   const std::vector<Condition>& conditions) {
  std::set<ActionLabel> vocab(a.vocabulary.begin(), a.vocabulary.end());
  vocab.insert(b.vocabulary.begin(), b.vocabulary.end());
  std::vector<ActionLabel> outcomes = sorted_vocabulary(std::move(vocab));
  return {align_on(a, outcomes, conditions), align_on(b, outcomes, conditions)};
}

ConditionalPolicy load_policy(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw ValidationError(path.string() + ": malformed policy file");
  ConditionalPolicy p;
  if (!j.contains("side") || !j["side"].is_string())
    throw ValidationError(path.string() + ": missing field 'side'");
  auto side = parse_speaker(j["side"].get<std::string>());
  if (!side) throw ValidationError(path.string() + ": unknown side");
  p.side = *side;
  if (j.contains("opener") && j["opener"].is_string()) {
    auto op = parse_speaker(j["opener"].get<std::string>());
    if (!op) throw ValidationError(path.string() + ": unknown opener");
    p.opener = op;
  }
  if (!j.contains("rows") || !j["rows"].is_object())
    throw ValidationError(path.string() + ": missing field 'rows'");
  std::set<ActionLabel> vocab;
  for (const auto& [cond_s, row_j] : j["rows"].items()) {
    auto cond = Condition::parse(cond_s);
    if (!cond) throw ValidationError(path.string() + ": unknown condition '" + cond_s + "'");
    if (!row_j.is_object())
      throw ValidationError(path.string() + ": row '" + cond_s + "' is not an object");
    PolicyRow row;
    for (const auto& [a_s, prob] : row_j.items()) {
      auto a = parse_action(a_s);
      if (!a) throw ValidationError(path.string() + ": unknown action label '" + a_s + "'");
      if (!prob.is_number())
        throw ValidationError(path.string() + ": non-numeric probability for '" + a_s + "'");
      row[*a] = prob.get<double>();
      vocab.insert(*a);
    }
    p.table[*cond] = std::move(row);
  }
  p.vocabulary = sorted_vocabulary(std::move(vocab));
  if (j.contains("condition_weights")) {
    for (const auto& [cond_s, w] : j["condition_weights"].items()) {
      auto cond = Condition::parse(cond_s);
      if (!cond || !w.is_number())
        throw ValidationError(path.string() + ": bad condition_weights entry '" + cond_s + "'");
      p.condition_weights[*cond] = w.get<double>();
    }
  }
  p.validate();
  return p;
}

void save_policy(const ConditionalPolicy& p, const std::filesystem::path& path) {
  json j;
  j["side"] = to_string(p.side);
  if (p.opener) j["opener"] = to_string(*p.opener);
  json rows = json::object();
  for (const auto& [cond, row] : p.table) {
    json r = json::object();
    std::vector<ActionLabel> order;
    for (const auto& [a, _] : row) order.push_back(a);
    std::sort(order.begin(), order.end(), outcome_less);
    for (ActionLabel a : order) r[to_string(a)] = row.at(a);
    rows[cond.str()] = std::move(r);
  }
  j["rows"] = std::move(rows);
  if (!p.condition_weights.empty()) {
    json w = json::object();
    for (const auto& [cond, n] : p.condition_weights) w[cond.str()] = n;
    j["condition_weights"] = std::move(w);
  }
  write_file(path, j.dump(2) + "\n");
}

}  // namespace simobj
