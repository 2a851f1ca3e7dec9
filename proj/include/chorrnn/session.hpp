#ifndef CHORRNN_SESSION_HPP
#define CHORRNN_SESSION_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "chorrnn/generator.hpp"
#include "chorrnn/mocap.hpp"
#include "chorrnn/model.hpp"

namespace chorrnn {

// Errors raised by the session store, mapped onto HTTP status classes by the
// server.
class SessionError : public std::runtime_error {
 public:
  enum class Kind { kNotFound, kInvalid, kConflict, kTooLarge };
  SessionError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class Author { kHuman, kMachine };
std::string to_string(Author author);

// Everything needed to regenerate a machine segment bit for bit.
struct Provenance {
  std::string model_id;
  std::string model_checksum;  // FNV-1a 64 of the checkpoint bytes, hex
  SamplingPolicy policy;
  std::size_t warmup_frames = 0;  // timeline prefix the model was warmed on
  std::size_t steps = 0;
};

struct Segment {
  Author author = Author::kHuman;
  MotionSequence frames;
  std::optional<Provenance> provenance;  // machine segments only
};

struct Candidate {
  MotionSequence frames;
  Provenance provenance;
};

struct Session {
  std::string id;
  std::string model_id;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
  // Joint schema, fixed by the first segment.
  double fps = 0.0;
  std::vector<std::string> joint_names;
  std::vector<Segment> timeline;
  std::vector<Candidate> pending;

  std::size_t total_frames() const;
  // Concatenation of the first `segments` timeline segments.
  MotionSequence concatenated(std::size_t segments) const;
};

enum class ExportSelection { kFull, kHumanOnly, kMachineOnly };
ExportSelection parse_export_selection(const std::string& name);

struct ModelInfo {
  std::string id;
  ModelConfig config;
  std::string checksum;
  std::filesystem::path path;
};

std::string checksum_hex(std::span<const std::uint8_t> bytes);

// File-backed session store. Each session lives in <sessions_dir>/<id>/ as
// session.json plus one sequence file per timeline segment and pending
// candidate. Mutations on one session are serialized; distinct sessions
// proceed in parallel. Models are loaded once and shared read-only.
class SessionStore {
 public:
  SessionStore(std::filesystem::path models_dir, std::filesystem::path sessions_dir,
               std::size_t max_frames_per_request = 100000);

  std::vector<ModelInfo> list_models() const;

  Session create_session(const std::string& model_id);
  Session get(const std::string& id) const;
  Session add_human_segment(const std::string& id, const MotionSequence& frames);
  std::vector<Candidate> generate_candidates(const std::string& id, std::size_t k,
                                             std::size_t steps, const SamplingPolicy& policy);
  Session accept_candidate(const std::string& id, std::size_t index);
  MotionSequence export_timeline(const std::string& id, ExportSelection which) const;

  // Regenerates the machine segment at `index` from its provenance.
  MotionSequence reproduce(const std::string& id, std::size_t index) const;

  std::size_t max_frames_per_request() const { return max_frames_; }

 private:
  struct LoadedModel {
    std::shared_ptr<const Model> model;
    std::string checksum;
  };

  LoadedModel model(const std::string& model_id) const;
  std::shared_ptr<std::mutex> lock_for(const std::string& id) const;
  Session load(const std::string& id) const;
  void persist(const Session& session) const;
  std::filesystem::path session_dir(const std::string& id) const;

  std::filesystem::path models_dir_;
  std::filesystem::path sessions_dir_;
  std::size_t max_frames_;

  mutable std::mutex registry_mu_;
  mutable std::map<std::string, std::shared_ptr<std::mutex>> session_locks_;
  mutable std::map<std::string, LoadedModel> models_;
};

nlohmann::json session_to_json(const Session& session);
nlohmann::json provenance_to_json(const Provenance& p);
nlohmann::json model_info_to_json(const ModelInfo& info);
nlohmann::json frames_to_json(const MotionSequence& seq);

}  // namespace chorrnn

#endif  // CHORRNN_SESSION_HPP
