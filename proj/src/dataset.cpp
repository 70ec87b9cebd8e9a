#include "halspan/dataset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "halspan/error.hpp"
#include "halspan/io.hpp"
#include "halspan/utf8.hpp"

namespace halspan {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 14> kLanguages = {
    "ar", "ca", "cs", "de", "en", "es", "eu", "fa", "fi", "fr", "hi", "it", "sv", "zh"};

const ojson& require(const ojson& record, const std::string& key) {
  auto it = record.find(key);
  if (it == record.end()) throw Error(ErrorKind::kMissingField, "missing field '" + key + "'");
  return *it;
}

std::string require_string(const ojson& record, const std::string& key) {
  const auto& v = require(record, key);
  if (!v.is_string()) throw Error(ErrorKind::kParseError, "field '" + key + "' is not a string");
  return v.get<std::string>();
}

std::size_t offset(const ojson& v, const std::string& what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw Error(ErrorKind::kParseError, what + " is not a non-negative integer");
  }
  return static_cast<std::size_t>(v.get<long long>());
}

SpanSet parse_pairs(const ojson& v, std::size_t text_len, const std::string& key) {
  if (!v.is_array()) throw Error(ErrorKind::kParseError, "field '" + key + "' is not an array");
  std::vector<CharSpan> spans;
  for (const auto& pair : v) {
    if (!pair.is_array() || pair.size() != 2) {
      throw Error(ErrorKind::kParseError, "field '" + key + "' holds a non-[start,end] entry");
    }
    spans.emplace_back(offset(pair[0], key + " start"), offset(pair[1], key + " end"));
  }
  return SpanSet::normalize(std::move(spans), text_len);
}

std::vector<SoftSpan> parse_soft(const ojson& v, std::size_t text_len, const std::string& key) {
  if (!v.is_array()) throw Error(ErrorKind::kParseError, "field '" + key + "' is not an array");
  std::vector<SoftSpan> out;
  for (const auto& item : v) {
    if (!item.is_object()) {
      throw Error(ErrorKind::kParseError, "field '" + key + "' holds a non-object entry");
    }
    CharSpan span(offset(require(item, "start"), key + " start"),
                  offset(require(item, "end"), key + " end"));
    if (span.end() > text_len) {
      throw Error(ErrorKind::kOffsetOutOfBounds,
                  key + " span [" + std::to_string(span.start()) + "," +
                      std::to_string(span.end()) + ") exceeds answer length " +
                      std::to_string(text_len));
    }
    const auto& prob = require(item, "prob");
    if (!prob.is_number()) throw Error(ErrorKind::kParseError, key + " prob is not a number");
    out.emplace_back(span, prob.get<double>());
  }
  return out;
}

ojson pairs_json(const SpanSet& s) {
  ojson arr = ojson::array();
  for (const auto& span : s.spans()) arr.push_back(ojson::array({span.start(), span.end()}));
  return arr;
}

ojson soft_json(std::span<const SoftSpan> soft) {
  ojson arr = ojson::array();
  for (const auto& s : soft) {
    ojson o;
    o["start"] = s.span().start();
    o["end"] = s.span().end();
    o["prob"] = s.prob();
    arr.push_back(std::move(o));
  }
  return arr;
}

Instance parse_instance(const ojson& record, const FieldMap& f) {
  if (!record.is_object()) throw Error(ErrorKind::kParseError, "record is not a JSON object");
  Instance inst;
  inst.id = require_string(record, f.id);
  inst.lang = require_string(record, f.lang);
  if (std::find(kLanguages.begin(), kLanguages.end(), inst.lang) == kLanguages.end()) {
    throw Error(ErrorKind::kParseError, "unsupported language '" + inst.lang + "'");
  }
  inst.question = require_string(record, f.question);
  inst.answer = require_string(record, f.answer);
  if (inst.answer.empty()) throw Error(ErrorKind::kEmptyText, "answer text is empty");
  if (record.contains(f.model)) inst.producing_model = require_string(record, f.model);
  const std::size_t len = utf8::length(inst.answer);

  if (record.contains(f.hard)) inst.gold_hard = parse_pairs(record.at(f.hard), len, f.hard);
  if (record.contains(f.soft)) inst.gold_soft = parse_soft(record.at(f.soft), len, f.soft);
  if (record.contains(f.annotators)) {
    const auto& sets = record.at(f.annotators);
    if (!sets.is_array()) {
      throw Error(ErrorKind::kParseError, "field '" + f.annotators + "' is not an array");
    }
    std::vector<SpanSet> parsed;
    for (const auto& set : sets) parsed.push_back(parse_pairs(set, len, f.annotators));
    inst.annotator_sets = std::move(parsed);
  }

  const std::array<const std::string*, 8> known = {&f.id,    &f.lang, &f.question, &f.answer,
                                                   &f.model, &f.hard, &f.soft,     &f.annotators};
  for (auto it = record.begin(); it != record.end(); ++it) {
    bool is_known = std::any_of(known.begin(), known.end(),
                                [&](const std::string* k) { return *k == it.key(); });
    if (!is_known) inst.extra[it.key()] = it.value();
  }
  return inst;
}

template <class Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ojson record;
      try {
        record = ojson::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParseError, e.what());
      }
      fn(record);
    } catch (const Error& e) {
      if (e.line()) throw;
      throw Error(e.kind(), e.detail(), line_no);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParseError, e.what(), line_no);
    }
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  return in;
}

}  // namespace

std::size_t Instance::answer_length() const { return utf8::length(answer); }

Prediction Prediction::empty(std::string id, std::size_t text_len) {
  Prediction p;
  p.id = std::move(id);
  p.hard = SpanSet(text_len);
  return p;
}

FieldMap FieldMap::from_json(const nlohmann::json& overrides) {
  FieldMap f;
  auto take = [&](const char* key, std::string& slot) {
    if (overrides.contains(key)) slot = overrides.at(key).get<std::string>();
  };
  take("id", f.id);
  take("lang", f.lang);
  take("question", f.question);
  take("answer", f.answer);
  take("model", f.model);
  take("hard", f.hard);
  take("soft", f.soft);
  take("annotators", f.annotators);
  return f;
}

std::span<const std::string_view> task_languages() { return kLanguages; }

std::vector<Instance> parse_jsonl(std::istream& in, const FieldMap& fields) {
  std::vector<Instance> out;
  for_each_line(in, [&](const ojson& record) { out.push_back(parse_instance(record, fields)); });
  return out;
}

std::vector<Instance> read_jsonl(const std::filesystem::path& path, const FieldMap& fields) {
  auto in = open_input(path);
  return parse_jsonl(in, fields);
}

nlohmann::ordered_json to_json(const Instance& inst, const FieldMap& f) {
  ojson o;
  o[f.id] = inst.id;
  o[f.lang] = inst.lang;
  o[f.question] = inst.question;
  o[f.answer] = inst.answer;
  if (inst.producing_model) o[f.model] = *inst.producing_model;
  if (inst.gold_hard) o[f.hard] = pairs_json(*inst.gold_hard);
  if (inst.gold_soft) o[f.soft] = soft_json(*inst.gold_soft);
  if (inst.annotator_sets) {
    ojson sets = ojson::array();
    for (const auto& s : *inst.annotator_sets) sets.push_back(pairs_json(s));
    o[f.annotators] = std::move(sets);
  }
  for (auto it = inst.extra.begin(); it != inst.extra.end(); ++it) o[it.key()] = it.value();
  return o;
}

void write_jsonl(std::span<const Instance> instances, const std::filesystem::path& path,
                 const FieldMap& fields) {
  std::string out;
  for (const auto& inst : instances) {
    out += to_json(inst, fields).dump();
    out += '\n';
  }
  io::atomic_write(path, out);
}

LengthIndex answer_lengths(std::span<const Instance> instances) {
  LengthIndex index;
  for (const auto& inst : instances) index.emplace(inst.id, inst.answer_length());
  return index;
}

void validate(const Prediction& pred) {
  std::vector<CharSpan> spans;
  for (const auto& s : pred.soft) {
    if (s.span().end() > pred.hard.text_len()) {
      throw Error(ErrorKind::kOffsetOutOfBounds,
                  "soft span of '" + pred.id + "' exceeds text length " +
                      std::to_string(pred.hard.text_len()));
    }
    spans.push_back(s.span());
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start() < spans[i - 1].end()) {
      throw Error(ErrorKind::kPrecondition, "soft spans of '" + pred.id + "' overlap");
    }
  }
}

std::vector<Prediction> parse_predictions(std::istream& in, const LengthIndex* lengths) {
  std::vector<Prediction> out;
  for_each_line(in, [&](const ojson& record) {
    if (!record.is_object()) throw Error(ErrorKind::kParseError, "record is not a JSON object");
    Prediction p;
    p.id = require_string(record, "id");
    const auto& hard = require(record, "hard_labels");
    const auto& soft = require(record, "soft_labels");
    std::size_t len = 0;
    if (lengths) {
      auto it = lengths->find(p.id);
      if (it == lengths->end()) {
        throw Error(ErrorKind::kMissingInstance, "no instance with id '" + p.id + "'");
      }
      len = it->second;
    } else {
      for (const auto& pair : hard) {
        if (pair.is_array() && pair.size() == 2 && pair[1].is_number_integer()) {
          len = std::max(len, pair[1].get<std::size_t>());
        }
      }
      for (const auto& item : soft) {
        if (item.is_object() && item.contains("end") && item["end"].is_number_integer()) {
          len = std::max(len, item["end"].get<std::size_t>());
        }
      }
    }
    p.hard = parse_pairs(hard, len, "hard_labels");
    p.soft = parse_soft(soft, len, "soft_labels");
    for (auto it = record.begin(); it != record.end(); ++it) {
      if (it.key() != "id" && it.key() != "hard_labels" && it.key() != "soft_labels") {
        p.extra[it.key()] = it.value();
      }
    }
    validate(p);
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path,
                                         const LengthIndex* lengths) {
  auto in = open_input(path);
  return parse_predictions(in, lengths);
}

std::string to_jsonl_line(const Prediction& pred) {
  ojson o;
  o["id"] = pred.id;
  o["hard_labels"] = pairs_json(pred.hard);
  o["soft_labels"] = soft_json(pred.soft);
  for (auto it = pred.extra.begin(); it != pred.extra.end(); ++it) o[it.key()] = it.value();
  return o.dump();
}

std::string to_jsonl(std::span<const Prediction> preds) {
  std::string out;
  for (const auto& p : preds) {
    out += to_jsonl_line(p);
    out += '\n';
  }
  return out;
}

void write_predictions(std::span<const Prediction> preds, const std::filesystem::path& path) {
  io::atomic_write(path, to_jsonl(preds));
}

}  // namespace halspan
