#include "cirlab/pipeline/annotate.hpp"

#include "cirlab/error.hpp"
#include "cirlab/parallel.hpp"
#include "cirlab/text.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <mutex>
#include <optional>
#include <set>

namespace cirlab::data {

namespace {

ServiceResponse call(ServiceClient& client, const ServiceRequest& request, const AnnotationOptions& options) {
  try {
    return complete_with_retry(client, request, options.retry, options.sleep);
  } catch (const PermanentServiceError& e) {
    throw AnnotationError(e.what());
  } catch (const TransientServiceError& e) {
    throw AnnotationError(e.what());
  }
}

bool is_no_change(std::string text) {
  text = to_lower(trim(text));
  while (!text.empty() && (text.back() == '.' || text.back() == '!')) text.pop_back();
  return text == kNoChangeSentinel;
}

// Shared skeleton of the two resumable stages. `key_of` names an output record, `work`
// produces the record for input i or throws AnnotationError.
template <typename KeyOf, typename Work>
StageReport run_resumable(std::size_t count, const std::vector<std::string>& keys, KeyOf key_of, Work work,
                          std::size_t workers, const std::filesystem::path& output,
                          const std::filesystem::path& failures_path, const char* stage) {
  std::map<std::string, Json> done;
  for (auto& record : read_stage_output(output)) done.emplace(key_of(record), std::move(record));

  StageReport report;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < count; ++i) {
    if (done.contains(keys[i])) {
      ++report.reused;
    } else {
      todo.push_back(i);
    }
  }

  std::vector<std::optional<Json>> failures(count);
  std::mutex write_mutex;
  {
    JsonlAppender appender(output, false);
    parallel_for(todo.size(), workers, [&](std::size_t t) {
      const std::size_t i = todo[t];
      try {
        Json record = work(i);
        std::lock_guard lock(write_mutex);
        appender.append(record);
        done.emplace(keys[i], std::move(record));
        ++report.completed;
      } catch (const AnnotationError& e) {
        spdlog::warn("{}: '{}' failed: {}", stage, keys[i], e.what());
        failures[i] = Json{{"key", keys[i]}, {"stage", stage}, {"error", e.what()}};
      }
    });
  }

  // Canonical order so the output does not depend on worker scheduling.
  std::vector<Json> ordered;
  for (std::size_t i = 0; i < count; ++i)
    if (const auto it = done.find(keys[i]); it != done.end()) ordered.push_back(it->second);
  const auto tmp = std::filesystem::path(output).concat(".tmp");
  write_jsonl(tmp, ordered);
  std::filesystem::rename(tmp, output);

  for (auto& f : failures)
    if (f) report.failures.push_back(std::move(*f));
  write_jsonl(failures_path, report.failures);
  return report;
}

std::string pair_key(const std::string& reference, const std::string& target) { return reference + "->" + target; }

}  // namespace

CaptionRecord caption_image(const ImageRecord& record, ServiceClient& client, const PromptLibrary& prompts,
                            const AnnotationOptions& options) {
  ServiceRequest request;
  request.prompt = prompts.caption_prompt(record);
  request.image = record.path;
  request.max_tokens = options.caption_max_tokens;
  const ServiceResponse response = call(client, request, options);

  CaptionRecord caption;
  caption.image_id = record.id;
  caption.caption = trim(response.text);
  caption.generator = client.tag();
  caption.prompt_fingerprint = prompt_fingerprint(request.prompt);
  if (caption.caption.empty()) throw AnnotationError("service returned an empty caption");
  const auto limit = static_cast<std::size_t>(options.caption_max_tokens);
  if (count_whitespace_tokens(caption.caption) > limit) {
    caption.caption = truncate_whitespace_tokens(caption.caption, limit);
    caption.truncated = true;
  }
  return caption;
}

ModificationRecord synthesize_modification(const std::string& reference_caption, const std::string& target_caption,
                                           ServiceClient& client, const PromptLibrary& prompts,
                                           const AnnotationOptions& options) {
  if (trim(reference_caption).empty() || trim(target_caption).empty())
    throw ContractViolation("synthesize_modification: both captions must be non-empty");
  ServiceRequest request;
  request.prompt = prompts.synthesis_prompt(reference_caption, target_caption);
  request.max_tokens = options.caption_max_tokens;
  const ServiceResponse response = call(client, request, options);

  ModificationRecord m;
  m.text = trim(response.text);
  if (m.text.empty()) throw AnnotationError("service returned an empty modification text");
  m.no_change = is_no_change(m.text);
  m.generator = client.tag();
  m.prompt_fingerprint = prompt_fingerprint(request.prompt);
  return m;
}

std::vector<Json> read_stage_output(const std::filesystem::path& path) {
  std::vector<Json> out;
  std::ifstream in(path);
  if (!in) return out;
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(Json::parse(lines[i]));
    } catch (const Json::parse_error& e) {
      if (i + 1 == lines.size()) {
        spdlog::warn("{}: ignoring a torn final line from an interrupted run", path.string());
        break;
      }
      throw DataError(path.string() + ": unreadable line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, CaptionRecord> read_captions(const std::filesystem::path& path) {
  std::map<std::string, CaptionRecord> out;
  for (const auto& j : read_stage_output(path)) {
    CaptionRecord c = caption_record_from_json(j);
    out[c.image_id] = std::move(c);
  }
  return out;
}

std::vector<ModificationRecord> read_modifications(const std::filesystem::path& path) {
  std::vector<ModificationRecord> out;
  for (const auto& j : read_stage_output(path)) out.push_back(modification_record_from_json(j));
  return out;
}

StageReport run_caption_stage(const std::vector<ImageRecord>& records, ServiceClient& client,
                              const PromptLibrary& prompts, const AnnotationOptions& options,
                              const std::filesystem::path& output, const std::filesystem::path& failures_path) {
  std::vector<std::string> keys;
  for (const auto& r : records) keys.push_back(r.id);
  return run_resumable(
      records.size(), keys, [](const Json& j) { return j.at("image_id").get<std::string>(); },
      [&](std::size_t i) { return to_json(caption_image(records[i], client, prompts, options)); }, options.workers,
      output, failures_path, "caption");
}

StageReport run_synthesis_stage(const std::vector<CandidatePair>& pairs,
                                const std::map<std::string, CaptionRecord>& captions, ServiceClient& client,
                                const PromptLibrary& prompts, const AnnotationOptions& options,
                                const std::filesystem::path& output, const std::filesystem::path& failures_path) {
  std::vector<std::string> keys;
  for (const auto& p : pairs) keys.push_back(pair_key(p.reference_id, p.target_id));
  return run_resumable(
      pairs.size(), keys,
      [](const Json& j) { return pair_key(j.at("reference_id").get<std::string>(), j.at("target_id").get<std::string>()); },
      [&](std::size_t i) {
        const CandidatePair& p = pairs[i];
        const auto ref = captions.find(p.reference_id);
        const auto tgt = captions.find(p.target_id);
        if (ref == captions.end() || tgt == captions.end()) throw AnnotationError("missing caption for one side of the pair");
        ModificationRecord m = synthesize_modification(ref->second.caption, tgt->second.caption, client, prompts, options);
        m.reference_id = p.reference_id;
        m.target_id = p.target_id;
        return to_json(m);
      },
      options.workers, output, failures_path, "synthesize");
}

}  // namespace cirlab::data
