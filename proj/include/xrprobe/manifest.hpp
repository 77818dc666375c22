#pragma once

// Dataset manifest (JSON):
//
//   {
//     "version": 1,
//     "label_kind": "binary" | "multiclass" | "multilabel" | "mask" | "boxes" | "text",
//     "num_classes": C,
//     "entries": [
//       { "image_id": "img-001", "split": "train" | "val" | "test",
//         "label": 1 | [0,1,0] | [{"x_min":..,"y_min":..,"x_max":..,"y_max":..,"class":0}] | "report text",
//         "mask": "masks/img-001.pgm",
//         "sex": "M" | "F", "age_years": 54.0, "group_id": "study-17" }
//     ]
//   }
//
// "labels" is accepted as a synonym of "label". "label" is omitted for label_kind "mask"; "mask" paths are relative to the
// manifest file. A binary/multiclass entry may also carry a mask (multitask).

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "xrprobe/bundle.hpp"
#include "xrprobe/error.hpp"
#include "xrprobe/pgm.hpp"

namespace xrprobe {

enum class Split { Train, Val, Test };
enum class Sex { M, F };
enum class LabelKind { Binary, Multiclass, Multilabel, Mask, Boxes, Text };

struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  int cls = 0;
  std::optional<double> confidence;

  double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
};

struct BinaryLabel { int value = 0; };
struct ClassLabel { int index = 0; };
struct MultiLabel { std::vector<std::uint8_t> bits; };
struct MaskRef { std::string path; };
struct BoxesLabel { std::vector<Box> boxes; };
struct TextLabel { std::string text; };

using LabelValue = std::variant<BinaryLabel, ClassLabel, MultiLabel, MaskRef, BoxesLabel, TextLabel>;

struct ManifestEntry {
  std::string image_id;
  LabelValue label;
  std::optional<std::string> mask;  // resolved path
  Split split = Split::Train;
  std::optional<Sex> sex;
  std::optional<double> age_years;
  std::optional<std::string> group_id;
};

struct DatasetManifest {
  LabelKind kind = LabelKind::Binary;
  int num_classes = 2;
  std::vector<ManifestEntry> entries;

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].split == s) out.push_back(i);
    return out;
  }
};

inline std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline std::string to_string(LabelKind k) {
  constexpr const char* names[] = {"binary", "multiclass", "multilabel", "mask", "boxes", "text"};
  return names[static_cast<int>(k)];
}

inline LabelKind parse_label_kind(const std::string& s) {
  if (s == "binary") return LabelKind::Binary;
  if (s == "multiclass") return LabelKind::Multiclass;
  if (s == "multilabel") return LabelKind::Multilabel;
  if (s == "mask") return LabelKind::Mask;
  if (s == "boxes") return LabelKind::Boxes;
  if (s == "text") return LabelKind::Text;
  throw DataError("unknown label_kind '" + s + "'");
}

inline Box parse_box(const nlohmann::json& j) {
  Box b;
  b.x_min = j.at("x_min").get<double>();
  b.y_min = j.at("y_min").get<double>();
  b.x_max = j.at("x_max").get<double>();
  b.y_max = j.at("y_max").get<double>();
  b.cls = j.value("class", 0);
  if (j.contains("confidence")) b.confidence = j.at("confidence").get<double>();
  if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max))
    throw DataError("box must satisfy x_min < x_max and y_min < y_max");
  return b;
}

inline nlohmann::json box_to_json(const Box& b) {
  nlohmann::json j = {{"x_min", b.x_min}, {"y_min", b.y_min}, {"x_max", b.x_max}, {"y_max", b.y_max}, {"class", b.cls}};
  if (b.confidence) j["confidence"] = *b.confidence;
  return j;
}

inline DatasetManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  DatasetManifest m;
  try {
    m.kind = parse_label_kind(j.at("label_kind").get<std::string>());
    m.num_classes = j.value("num_classes", m.kind == LabelKind::Binary ? 2 : 0);
    if (m.kind != LabelKind::Text && m.num_classes < 1) throw DataError("num_classes must be positive");
    std::set<std::string> seen;
    std::size_t idx = 0;
    for (const auto& e : j.at("entries")) {
      const std::string where = "manifest entry " + std::to_string(idx++);
      ManifestEntry en;
      en.image_id = e.at("image_id").get<std::string>();
      if (!seen.insert(en.image_id).second) throw DataError(where + ": duplicate image_id '" + en.image_id + "'");
      const auto split = e.at("split").get<std::string>();
      if (split == "train") en.split = Split::Train;
      else if (split == "val") en.split = Split::Val;
      else if (split == "test") en.split = Split::Test;
      else throw DataError(where + ": unknown split '" + split + "'");
      if (e.contains("mask")) en.mask = (base_dir / e.at("mask").get<std::string>()).string();
      auto label = [&]() -> const nlohmann::json& { return e.contains("labels") ? e.at("labels") : e.at("label"); };
      switch (m.kind) {
        case LabelKind::Binary: {
          const int v = label().get<int>();
          if (v != 0 && v != 1) throw DataError(where + ": binary label must be 0 or 1");
          en.label = BinaryLabel{v};
          break;
        }
        case LabelKind::Multiclass: {
          const int v = label().get<int>();
          if (v < 0 || v >= m.num_classes) throw DataError(where + ": class index out of range");
          en.label = ClassLabel{v};
          break;
        }
        case LabelKind::Multilabel: {
          MultiLabel ml;
          for (const auto& b : label()) ml.bits.push_back(b.get<int>() != 0 ? 1 : 0);
          if (static_cast<int>(ml.bits.size()) != m.num_classes)
            throw DataError(where + ": multilabel vector length != num_classes");
          en.label = std::move(ml);
          break;
        }
        case LabelKind::Mask:
          if (!en.mask) throw DataError(where + ": mask entry without 'mask' path");
          en.label = MaskRef{*en.mask};
          break;
        case LabelKind::Boxes: {
          BoxesLabel bl;
          for (const auto& b : label()) {
            bl.boxes.push_back(parse_box(b));
            if (bl.boxes.back().cls < 0 || bl.boxes.back().cls >= m.num_classes)
              throw DataError(where + ": box class out of range");
          }
          en.label = std::move(bl);
          break;
        }
        case LabelKind::Text:
          en.label = TextLabel{label().get<std::string>()};
          break;
      }
      if (e.contains("sex")) {
        const auto s = e.at("sex").get<std::string>();
        if (s == "M") en.sex = Sex::M;
        else if (s == "F") en.sex = Sex::F;
        else throw DataError(where + ": sex must be 'M' or 'F'");
      }
      if (e.contains("age_years")) {
        en.age_years = e.at("age_years").get<double>();
        if (*en.age_years < 0) throw DataError(where + ": negative age");
      }
      if (e.contains("group_id")) en.group_id = e.at("group_id").get<std::string>();
      m.entries.push_back(std::move(en));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("manifest schema error: ") + ex.what());
  }
  return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("manifest '" + path + "' is not valid JSON: " + ex.what());
  }
  return parse_manifest(j, std::filesystem::path(path).parent_path());
}

/// Every manifest id must resolve to exactly one bundle record.
inline void check_resolves(const DatasetManifest& m, const EmbeddingBundle& b) {
  for (const auto& e : m.entries)
    if (!b.find(e.image_id)) throw DataError("manifest image_id '" + e.image_id + "' has no bundle record");
}

inline void check_has_test(const DatasetManifest& m) {
  if (m.indices(Split::Test).empty()) throw DataError("manifest has an empty test split");
}

/// Stratum key used for class-stratified sampling.
inline std::string stratum_of(const LabelValue& v) {
  if (const auto* b = std::get_if<BinaryLabel>(&v)) return std::to_string(b->value);
  if (const auto* c = std::get_if<ClassLabel>(&v)) return std::to_string(c->index);
  if (const auto* ml = std::get_if<MultiLabel>(&v)) {
    std::string s;
    for (auto bit : ml->bits) s.push_back(bit ? '1' : '0');
    return s;
  }
  return "all";
}

}  // namespace xrprobe
