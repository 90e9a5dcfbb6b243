#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "reasonrec/corpus.hpp"
#include "reasonrec/splitter.hpp"

namespace reasonrec {

enum class ParseStatus { ok, fallback, failed };

std::string_view to_string(ParseStatus status);
ParseStatus parse_parse_status(std::string_view name);

struct EvalRecord {
  std::string user_id;
  std::string item_id;
  Split split = Split::test;
  BinaryLabel gold{0};
  std::optional<BinaryLabel> predicted;  // absent iff parse_status == failed
  std::optional<double> score;           // in [0, 1], higher means "Yes"
  bool score_from_logprobs = false;      // false: degenerate 0/1 fallback
  std::string reasoning_text;
  std::optional<std::string> reference_reasoning;
  ParseStatus parse_status = ParseStatus::failed;
  std::string variant;  // template id of the prediction prompt

  bool operator==(const EvalRecord&) const = default;
};

}  // namespace reasonrec
