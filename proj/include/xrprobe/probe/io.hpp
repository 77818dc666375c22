#pragma once

// Probe file: magic "XRPRB\0", u16 version = 1, u32 descriptor length,
// descriptor JSON (architecture + training trace), u64 parameter count,
// then the parameters as little-endian f32.

#include <array>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "xrprobe/bundle.hpp"
#include "xrprobe/error.hpp"
#include "xrprobe/probe/train.hpp"

namespace xrprobe::probe {

inline constexpr std::array<char, 6> kProbeMagic{'X', 'R', 'P', 'R', 'B', '\0'};
inline constexpr std::uint16_t kProbeVersion = 1;

inline nlohmann::json probe_descriptor(const TrainedProbe& p) {
  return {{"architecture", p.architecture}, {"best_epoch", p.best_epoch},  {"epochs_run", p.epochs_run},
          {"iterations", p.iterations},     {"stop_reason", p.stop_reason}, {"val_trace", p.val_trace},
          {"lr_trace", p.lr_trace}};
}

inline void save_probe(const TrainedProbe& p, const std::string& path) {
  if (p.params.size() != architecture_param_count(p.architecture))
    throw DataError("probe parameter count does not match its architecture");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  const std::string desc = probe_descriptor(p).dump();
  os.write(kProbeMagic.data(), kProbeMagic.size());
  detail::put_le<std::uint16_t>(os, kProbeVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(desc.size()));
  os.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  detail::put_le<std::uint64_t>(os, p.params.size());
  detail::put_f32s(os, p.params);
  if (!os) throw DataError("write failed for '" + path + "'");
}

inline TrainedProbe load_probe(const std::string& path) {
  detail::ByteReader rd(detail::read_file_bytes(path));
  std::string magic, desc;
  std::uint16_t version = 0;
  std::uint32_t len = 0;
  std::uint64_t count = 0;
  if (!rd.get_bytes(kProbeMagic.size(), magic) || std::memcmp(magic.data(), kProbeMagic.data(), kProbeMagic.size()) != 0)
    throw DataError("'" + path + "' is not a probe file");
  if (!rd.get(version) || version != kProbeVersion) throw DataError("'" + path + "': unsupported probe version");
  if (!rd.get(len) || !rd.get_bytes(len, desc)) throw DataError("'" + path + "': truncated descriptor");
  TrainedProbe p;
  try {
    const auto j = nlohmann::json::parse(desc);
    p.architecture = j.at("architecture");
    p.best_epoch = j.at("best_epoch");
    p.epochs_run = j.at("epochs_run");
    p.iterations = j.at("iterations");
    p.stop_reason = j.at("stop_reason");
    p.val_trace = j.at("val_trace").get<std::vector<double>>();
    p.lr_trace = j.at("lr_trace").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': bad descriptor: " + e.what());
  }
  if (!rd.get(count) || !rd.get_f32s(count, p.params) || !rd.at_end()) throw DataError("'" + path + "': truncated parameters");
  if (p.params.size() != architecture_param_count(p.architecture))
    throw DataError("'" + path + "': parameter count does not match architecture");
  return p;
}

}  // namespace xrprobe::probe
