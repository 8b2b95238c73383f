#pragma once

#include "cirlab/jsonl.hpp"
#include "cirlab/pipeline/prompts.hpp"
#include "cirlab/pipeline/records.hpp"
#include "cirlab/pipeline/services.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cirlab::data {

/// An annotation that could not be produced (service failure or unusable reply).
class AnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnnotationOptions {
  RetryPolicy retry;
  int caption_max_tokens = 128;
  std::size_t workers = 1;
  Sleeper sleep;  ///< empty: real sleeping between retries
};

/// Prompts `client` with the record's category, description and attributes and the
/// image itself. Captions longer than caption_max_tokens words are cut and flagged.
CaptionRecord caption_image(const ImageRecord& record, ServiceClient& client, const PromptLibrary& prompts,
                            const AnnotationOptions& options);

/// Asks `client` for the reference-to-target change. Ids in the result are left empty.
ModificationRecord synthesize_modification(const std::string& reference_caption, const std::string& target_caption,
                                           ServiceClient& client, const PromptLibrary& prompts,
                                           const AnnotationOptions& options);

struct StageReport {
  std::size_t completed = 0;  ///< produced in this run
  std::size_t reused = 0;     ///< already present in the output from an earlier run
  std::vector<Json> failures;

  bool partial() const { return !failures.empty(); }
};

/// Captions every record into `output` (JSONL). Records already captioned there are kept;
/// new ones are appended as they finish, and the file is finally rewritten in input
/// order. Failures go to `failures_path`, replacing any earlier failure list.
StageReport run_caption_stage(const std::vector<ImageRecord>& records, ServiceClient& client,
                              const PromptLibrary& prompts, const AnnotationOptions& options,
                              const std::filesystem::path& output, const std::filesystem::path& failures_path);

/// Same contract for modification texts. Pairs whose captions are missing fail without a
/// service call.
StageReport run_synthesis_stage(const std::vector<CandidatePair>& pairs,
                                const std::map<std::string, CaptionRecord>& captions, ServiceClient& client,
                                const PromptLibrary& prompts, const AnnotationOptions& options,
                                const std::filesystem::path& output, const std::filesystem::path& failures_path);

/// Reads a stage output, tolerating a torn final line left by an interrupted run.
std::vector<Json> read_stage_output(const std::filesystem::path& path);

std::map<std::string, CaptionRecord> read_captions(const std::filesystem::path& path);
std::vector<ModificationRecord> read_modifications(const std::filesystem::path& path);

}  // namespace cirlab::data
