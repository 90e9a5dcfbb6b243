#pragma once

#include <string_view>

namespace reasonrec {

struct DecodingParams {
  double temperature = 0.01;
  double top_p = 0.9;
  int max_new_tokens = 256;
  bool want_logprobs = false;

  bool operator==(const DecodingParams&) const = default;
};

enum class TaskKind { item_description, user_profile, reasoning_gt, zero_shot_predict, finetuned_predict };

std::string_view to_string(TaskKind task);
TaskKind parse_task_kind(std::string_view name);

// Generation settings per task. The finetuned row is ours (no published
// value); the other four are the published zero-shot settings.
DecodingParams default_params(TaskKind task);

// Throws ConfigError when temperature <= 0, top_p outside (0, 1] or
// max_new_tokens < 1.
void validate(const DecodingParams& params);

}  // namespace reasonrec
