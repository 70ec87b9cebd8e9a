#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "halspan/span.hpp"

namespace halspan {

/// One record of the task data: an LLM answer under audit, plus gold labels
/// when the split carries them.
struct Instance {
  std::string id;
  std::string lang;
  std::string question;
  std::string answer;
  std::optional<std::string> producing_model;
  std::optional<SpanSet> gold_hard;
  std::optional<std::vector<SoftSpan>> gold_soft;
  /// Per-annotator hard labels, when distributed.
  std::optional<std::vector<SpanSet>> annotator_sets;
  /// Fields the loader does not interpret, kept for round-tripping.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  std::size_t answer_length() const;
  bool operator==(const Instance&) const = default;
};

/// Per-instance system output in submission format.
struct Prediction {
  std::string id;
  SpanSet hard;
  std::vector<SoftSpan> soft;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  static Prediction empty(std::string id, std::size_t text_len);
  bool operator==(const Prediction&) const = default;
};

/// JSON key names of the task files. Defaults follow the released data.
struct FieldMap {
  std::string id = "id";
  std::string lang = "lang";
  std::string question = "model_input";
  std::string answer = "model_output_text";
  std::string model = "model_id";
  std::string hard = "hard_labels";
  std::string soft = "soft_labels";
  std::string annotators = "annotator_hard_labels";

  /// Keys present in `overrides` replace the defaults.
  static FieldMap from_json(const nlohmann::json& overrides);
};

/// The fourteen task languages.
std::span<const std::string_view> task_languages();

std::vector<Instance> read_jsonl(const std::filesystem::path& path, const FieldMap& fields = {});
std::vector<Instance> parse_jsonl(std::istream& in, const FieldMap& fields = {});
nlohmann::ordered_json to_json(const Instance& inst, const FieldMap& fields = {});
void write_jsonl(std::span<const Instance> instances, const std::filesystem::path& path,
                 const FieldMap& fields = {});

using LengthIndex = std::unordered_map<std::string, std::size_t>;
LengthIndex answer_lengths(std::span<const Instance> instances);

/// Reads prediction JSONL. With `lengths`, every prediction is bound to its
/// answer's length and unknown ids are rejected; otherwise each set is bound
/// to the furthest offset it mentions.
std::vector<Prediction> read_predictions(const std::filesystem::path& path,
                                         const LengthIndex* lengths = nullptr);
std::vector<Prediction> parse_predictions(std::istream& in, const LengthIndex* lengths = nullptr);
std::string to_jsonl_line(const Prediction& pred);
std::string to_jsonl(std::span<const Prediction> preds);
void write_predictions(std::span<const Prediction> preds, const std::filesystem::path& path);

/// Throws Error(kPrecondition) if soft spans overlap.
void validate(const Prediction& pred);

}  // namespace halspan
