#include "fedforget/records.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "fedforget/common.hpp"
#include "fedforget/config.hpp"
#include "fedforget/param_vector.hpp"

namespace fedforget {

using nlohmann::json;

std::string format_real(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

json record_to_json(const RoundRecord& r) {
  json j;
  j["round"] = r.round;
  j["phase"] = phase_name(r.phase);
  j["selected"] = r.selected;
  j["compromised_selected"] = r.compromised_selected;
  j["action"] = action_name(r.action);
  j["global_norm"] = r.global_params_norm;
  json l2 = json::object();
  for (const auto& [id, v] : r.update_l2) l2[std::to_string(id)] = v;
  j["update_l2"] = std::move(l2);
  j["acc_main"] = r.acc_main;
  j["acc_backdoor"] = r.acc_backdoor;
  if (r.l2_compromised_to_benign) j["l2_compromised_to_benign"] = *r.l2_compromised_to_benign;
  j["unlearn_steps"] = r.unlearn_steps;
  j["flags"] = r.flags;
  return j;
}

json diagnostics_to_json(std::uint64_t round, const IterationDiagnostics& d) {
  return json{{"round", round},
              {"epoch", d.epoch},
              {"step", d.step},
              {"lr", d.lr},
              {"loss", d.loss},
              {"ce_benign", d.terms.ce_benign},
              {"ce_trigger", d.terms.ce_trigger},
              {"penalty", d.terms.penalty},
              {"omega_p50", d.omega_p50},
              {"omega_p90", d.omega_p90},
              {"omega_p99", d.omega_p99},
              {"benign_batch", d.benign_batch},
              {"trigger_batch", d.trigger_batch}};
}

void write_rounds_csv(std::ostream& out, const ScenarioResult& result,
                      std::size_t compromised_id) {
  out << kRoundsCsvHeader << '\n';
  std::size_t fork = result.records.size();
  if (!result.normal_branch.empty()) {
    const auto first = result.normal_branch.front().round;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
      if (result.records[i].round == first) {
        fork = i;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const RoundRecord& r = result.records[i];
    double normal = r.acc_backdoor;
    if (i >= fork && i - fork < result.normal_branch.size()) {
      normal = result.normal_branch[i - fork].acc_backdoor;
    }
    out << r.round << ',' << phase_name(r.phase) << ',' << format_real(r.acc_main) << ','
        << format_real(r.acc_backdoor) << ',' << format_real(normal) << ',';
    auto c = r.update_l2.find(compromised_id);
    if (c != r.update_l2.end()) out << format_real(c->second);
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto& [id, v] : r.update_l2) {
      if (id == compromised_id) continue;
      lo = any ? std::min(lo, v) : v;
      hi = any ? std::max(hi, v) : v;
      any = true;
    }
    out << ',';
    if (any) out << format_real(lo);
    out << ',';
    if (any) out << format_real(hi);
    out << '\n';
  }
}

void write_rounds_jsonl(std::ostream& out, const std::vector<RoundRecord>& records,
                        const std::string& branch) {
  for (const auto& r : records) {
    json j = record_to_json(r);
    j["branch"] = branch;
    out << j.dump() << '\n';
  }
}

namespace {

constexpr std::array<char, 4> kMagic{'F', 'F', 'C', 'K'};

template <class T>
void put(std::ostream& out, T v) {
  std::array<unsigned char, sizeof(T)> b{};
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), b.size());
}

template <class T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw ArgumentError("checkpoint truncated");
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  json meta;
  meta["config"] = config_to_json(ck.config);
  meta["seed"] = ck.seed;
  meta["round"] = ck.state.round;
  meta["phase"] = phase_name(ck.state.phase);
  meta["phase_rounds"] = ck.state.phase_rounds;
  meta["finished"] = ck.state.finished;
  meta["flags"] = ck.state.flags;
  const std::string text = meta.dump();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_params(out, ck.state.global);
  if (!out) throw ArgumentError("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ArgumentError("not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ArgumentError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
  }
  const auto len = get<std::uint64_t>(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw ArgumentError("checkpoint truncated");
  }
  const json meta = json::parse(text);
  Checkpoint ck;
  ck.config = config_from_json(meta.at("config"));
  ck.seed = meta.at("seed").get<std::uint64_t>();
  ck.state.round = meta.at("round").get<std::uint64_t>();
  ck.state.phase = parse_phase(meta.at("phase").get<std::string>());
  ck.state.phase_rounds = meta.at("phase_rounds").get<std::size_t>();
  ck.state.finished = meta.at("finished").get<bool>();
  ck.state.flags = meta.at("flags").get<std::vector<std::string>>();
  ck.state.global = read_params(in);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write " + path.string());
  write_checkpoint(out, ck);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path.string());
  return read_checkpoint(in);
}

}  // namespace fedforget
