#pragma once

// Bundled synthetic fixtures: five populations with distinct QRFA policy
// pairs and the five personality presets, a three-population divergence
// fixture, and ready-to-run experiment configurations. Regeneration with
// the same seed is byte-identical.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace simobj {

struct FixtureSummary {
  std::vector<std::string> populations;
  std::filesystem::path minibench_config;
  std::filesystem::path divergence_config;
};

// Writes, per population N in 1..5:
//   popN.agent.json / popN.user.json   stored generating policies
//   popN.user_model.json                personality preset UN
//   popN.jsonl                          10,000 labeled dialogues
//   popN.ref.jsonl                      300 labeled dialogues (benchmark reference)
// plus divref/policytwin/personatwin (the divergence fixture: policytwin
// shares divref's policy but not its personality, personatwin the reverse),
// minibench.cfg, and divergence.cfg.
FixtureSummary bootstrap_fixtures(const std::filesystem::path& outdir,
                                  std::uint64_t seed = 42);

}  // namespace simobj
