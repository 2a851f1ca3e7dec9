#include "chorrnn/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>

namespace chorrnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

[[noreturn]] void fail(SessionError::Kind kind, const std::string& msg) {
  throw SessionError(kind, msg);
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
           ch == '-' || ch == '_' || ch == '.';
  });
}

std::string segment_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu.seq", i);
  return buf;
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

Author parse_author(const std::string& s) {
  if (s == "human") return Author::kHuman;
  if (s == "machine") return Author::kMachine;
  throw DataError("unknown author '" + s + "'");
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  p.model_id = j.at("model_id").get<std::string>();
  p.model_checksum = j.at("model_checksum").get<std::string>();
  p.policy.mode = parse_mode(j.at("policy").at("mode").get<std::string>());
  p.policy.bias = j.at("policy").at("bias").get<double>();
  p.policy.seed = j.at("policy").at("seed").get<std::uint64_t>();
  p.warmup_frames = j.at("warmup_frames").get<std::size_t>();
  p.steps = j.at("steps").get<std::size_t>();
  return p;
}

}  // namespace

std::string to_string(Author author) { return author == Author::kHuman ? "human" : "machine"; }

ExportSelection parse_export_selection(const std::string& name) {
  if (name == "full") return ExportSelection::kFull;
  if (name == "human_only") return ExportSelection::kHumanOnly;
  if (name == "machine_only") return ExportSelection::kMachineOnly;
  fail(SessionError::Kind::kInvalid,
       "unknown export selection '" + name + "' (expected full, human_only or machine_only)");
}

std::size_t Session::total_frames() const {
  std::size_t n = 0;
  for (const auto& s : timeline) n += s.frames.length();
  return n;
}

MotionSequence Session::concatenated(std::size_t segments) const {
  MotionSequence out;
  out.fps = fps;
  out.joint_names = joint_names;
  for (std::size_t i = 0; i < std::min(segments, timeline.size()); ++i) {
    const auto& f = timeline[i].frames.frames;
    out.frames.insert(out.frames.end(), f.begin(), f.end());
  }
  return out;
}

std::string checksum_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json provenance_to_json(const Provenance& p) {
  return {
      {"model_id", p.model_id},
      {"model_checksum", p.model_checksum},
      {"policy", {{"mode", to_string(p.policy.mode)}, {"bias", p.policy.bias}, {"seed", p.policy.seed}}},
      {"warmup_frames", p.warmup_frames},
      {"steps", p.steps},
  };
}

json model_info_to_json(const ModelInfo& info) {
  return {
      {"id", info.id},
      {"input_dim", info.config.input_dim},
      {"layers", info.config.layers},
      {"hidden", info.config.hidden},
      {"head", to_string(info.config.head)},
      {"mixtures", info.config.mixtures},
      {"checksum", info.checksum},
  };
}

json frames_to_json(const MotionSequence& seq) {
  json frames = json::array();
  for (const auto& f : seq.frames) frames.push_back(f);
  return frames;
}

json session_to_json(const Session& s) {
  json timeline = json::array();
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.timeline.size(); ++i) {
    const auto& seg = s.timeline[i];
    json j = {{"index", i},
              {"author", to_string(seg.author)},
              {"frames", seg.frames.length()},
              {"start_frame", start}};
    j["provenance"] = seg.provenance ? provenance_to_json(*seg.provenance) : json(nullptr);
    timeline.push_back(std::move(j));
    start += seg.frames.length();
  }
  json pending = json::array();
  for (std::size_t i = 0; i < s.pending.size(); ++i) {
    pending.push_back({{"index", i},
                       {"frames", s.pending[i].frames.length()},
                       {"provenance", provenance_to_json(s.pending[i].provenance)}});
  }
  return {
      {"id", s.id},
      {"model_id", s.model_id},
      {"created_ms", s.created_ms},
      {"updated_ms", s.updated_ms},
      {"fps", s.fps},
      {"joint_names", s.joint_names},
      {"total_frames", s.total_frames()},
      {"timeline", std::move(timeline)},
      {"pending", std::move(pending)},
  };
}

// ---------------------------------------------------------------------------

SessionStore::SessionStore(fs::path models_dir, fs::path sessions_dir,
                           std::size_t max_frames_per_request)
    : models_dir_(std::move(models_dir)),
      sessions_dir_(std::move(sessions_dir)),
      max_frames_(max_frames_per_request) {
  fs::create_directories(sessions_dir_);
}

std::vector<ModelInfo> SessionStore::list_models() const {
  std::vector<ModelInfo> out;
  if (!fs::is_directory(models_dir_)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(models_dir_)) {
    if (e.is_regular_file() && e.path().extension() == ".chrn") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      const LoadedModel lm = model(f.stem().string());
      out.push_back({f.stem().string(), lm.model->config, lm.checksum, f});
    } catch (const SessionError&) {
      // Unreadable checkpoints are not offered.
    }
  }
  return out;
}

SessionStore::LoadedModel SessionStore::model(const std::string& model_id) const {
  if (!valid_id(model_id)) fail(SessionError::Kind::kNotFound, "unknown model '" + model_id + "'");
  const fs::path path = models_dir_ / (model_id + ".chrn");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(SessionError::Kind::kNotFound, "unknown model '" + model_id + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string sum = checksum_hex(bytes);

  std::lock_guard<std::mutex> lock(registry_mu_);
  if (auto it = models_.find(model_id); it != models_.end() && it->second.checksum == sum) {
    return it->second;
  }
  try {
    LoadedModel lm{std::make_shared<const Model>(deserialize(bytes)), sum};
    models_[model_id] = lm;
    return lm;
  } catch (const DataError& e) {
    fail(SessionError::Kind::kNotFound, "model '" + model_id + "' is unreadable: " + e.what());
  }
}

std::shared_ptr<std::mutex> SessionStore::lock_for(const std::string& id) const {
  std::lock_guard<std::mutex> lock(registry_mu_);
  auto& m = session_locks_[id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

fs::path SessionStore::session_dir(const std::string& id) const { return sessions_dir_ / id; }

void SessionStore::persist(const Session& s) const {
  const fs::path dir = session_dir(s.id);
  fs::create_directories(dir / "segments");
  fs::create_directories(dir / "pending");
  // Segments are append-only; write the ones not yet on disk.
  for (std::size_t i = 0; i < s.timeline.size(); ++i) {
    const fs::path p = dir / "segments" / segment_file(i);
    if (!fs::exists(p)) write_file_atomic(p, sequence_to_text(s.timeline[i].frames));
  }
  for (const auto& e : fs::directory_iterator(dir / "pending")) fs::remove(e.path());
  for (std::size_t i = 0; i < s.pending.size(); ++i) {
    write_file_atomic(dir / "pending" / segment_file(i), sequence_to_text(s.pending[i].frames));
  }

  json meta = {
      {"id", s.id},
      {"model_id", s.model_id},
      {"created_ms", s.created_ms},
      {"updated_ms", s.updated_ms},
      {"fps", s.fps},
      {"joint_names", s.joint_names},
  };
  json segs = json::array();
  for (const auto& seg : s.timeline) {
    segs.push_back({{"author", to_string(seg.author)},
                    {"provenance", seg.provenance ? provenance_to_json(*seg.provenance) : json(nullptr)}});
  }
  json pend = json::array();
  for (const auto& c : s.pending) pend.push_back(provenance_to_json(c.provenance));
  meta["segments"] = std::move(segs);
  meta["pending"] = std::move(pend);
  write_file_atomic(dir / "session.json", meta.dump(2));
}

Session SessionStore::load(const std::string& id) const {
  if (!valid_id(id)) fail(SessionError::Kind::kNotFound, "unknown session '" + id + "'");
  const fs::path dir = session_dir(id);
  std::ifstream in(dir / "session.json");
  if (!in) fail(SessionError::Kind::kNotFound, "unknown session '" + id + "'");
  const json meta = json::parse(in);
  Session s;
  s.id = meta.at("id").get<std::string>();
  s.model_id = meta.at("model_id").get<std::string>();
  s.created_ms = meta.at("created_ms").get<std::int64_t>();
  s.updated_ms = meta.at("updated_ms").get<std::int64_t>();
  s.fps = meta.at("fps").get<double>();
  s.joint_names = meta.at("joint_names").get<std::vector<std::string>>();
  const auto& segs = meta.at("segments");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    Segment seg;
    seg.author = parse_author(segs[i].at("author").get<std::string>());
    if (!segs[i].at("provenance").is_null()) seg.provenance = provenance_from_json(segs[i].at("provenance"));
    seg.frames = read_sequence(dir / "segments" / segment_file(i));
    s.timeline.push_back(std::move(seg));
  }
  const auto& pend = meta.at("pending");
  for (std::size_t i = 0; i < pend.size(); ++i) {
    Candidate c;
    c.provenance = provenance_from_json(pend[i]);
    c.frames = read_sequence(dir / "pending" / segment_file(i));
    s.pending.push_back(std::move(c));
  }
  return s;
}

Session SessionStore::create_session(const std::string& model_id) {
  model(model_id);  // must exist and load
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  Session s;
  for (;;) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(gen()));
    s.id = buf;
    std::lock_guard<std::mutex> lock(registry_mu_);
    if (!fs::exists(session_dir(s.id)) && !session_locks_.count(s.id)) {
      session_locks_[s.id] = std::make_shared<std::mutex>();
      break;
    }
  }
  s.model_id = model_id;
  s.created_ms = s.updated_ms = now_ms();
  persist(s);
  return s;
}

Session SessionStore::get(const std::string& id) const {
  auto mu = lock_for(id);
  std::lock_guard<std::mutex> lock(*mu);
  return load(id);
}

Session SessionStore::add_human_segment(const std::string& id, const MotionSequence& frames) {
  if (frames.frames.empty()) fail(SessionError::Kind::kInvalid, "segment has no frames");
  if (frames.frames.size() > max_frames_) {
    fail(SessionError::Kind::kTooLarge, "segment has " + std::to_string(frames.frames.size()) +
                                            " frames, limit is " + std::to_string(max_frames_));
  }
  try {
    frames.validate();
  } catch (const DataError& e) {
    fail(SessionError::Kind::kInvalid, e.what());
  }
  auto mu = lock_for(id);
  std::lock_guard<std::mutex> lock(*mu);
  Session s = load(id);
  const LoadedModel lm = model(s.model_id);
  if (frames.width() != lm.model->config.input_dim) {
    fail(SessionError::Kind::kInvalid,
         "segment frames have " + std::to_string(frames.width()) + " values (" +
             std::to_string(frames.joints()) + " joints) but model '" + s.model_id + "' expects " +
             std::to_string(lm.model->config.input_dim));
  }
  if (s.timeline.empty()) {
    s.fps = frames.fps;
    s.joint_names = frames.joint_names;
  } else if (frames.joint_names != s.joint_names) {
    fail(SessionError::Kind::kInvalid, "segment joint names do not match the session schema");
  } else if (frames.fps != s.fps) {
    fail(SessionError::Kind::kInvalid, "segment fps " + std::to_string(frames.fps) +
                                           " does not match session fps " + std::to_string(s.fps));
  }
  s.timeline.push_back({Author::kHuman, frames, std::nullopt});
  s.pending.clear();
  s.updated_ms = now_ms();
  persist(s);
  return s;
}

std::vector<Candidate> SessionStore::generate_candidates(const std::string& id, std::size_t k,
                                                         std::size_t steps,
                                                         const SamplingPolicy& policy) {
  if (k < 1) fail(SessionError::Kind::kInvalid, "k must be >= 1");
  if (steps < 1) fail(SessionError::Kind::kInvalid, "steps must be >= 1");
  if (k * steps > max_frames_) {
    fail(SessionError::Kind::kTooLarge, "request would generate " + std::to_string(k * steps) +
                                            " frames, limit is " + std::to_string(max_frames_));
  }
  try {
    policy.validate();
  } catch (const std::invalid_argument& e) {
    fail(SessionError::Kind::kInvalid, e.what());
  }
  auto mu = lock_for(id);
  std::lock_guard<std::mutex> lock(*mu);
  Session s = load(id);
  if (s.timeline.empty()) {
    fail(SessionError::Kind::kConflict, "session has no segments to continue from");
  }
  const LoadedModel lm = model(s.model_id);
  const MotionSequence warm = s.concatenated(s.timeline.size());
  s.pending.clear();
  for (std::size_t j = 0; j < k; ++j) {
    Candidate c;
    c.provenance.model_id = s.model_id;
    c.provenance.model_checksum = lm.checksum;
    c.provenance.policy = policy;
    c.provenance.policy.seed = policy.seed + j;
    c.provenance.warmup_frames = warm.length();
    c.provenance.steps = steps;
    c.frames = rollout(*lm.model, warm, steps, c.provenance.policy);
    s.pending.push_back(std::move(c));
  }
  s.updated_ms = now_ms();
  persist(s);
  return s.pending;
}

Session SessionStore::accept_candidate(const std::string& id, std::size_t index) {
  auto mu = lock_for(id);
  std::lock_guard<std::mutex> lock(*mu);
  Session s = load(id);
  if (index >= s.pending.size()) {
    fail(SessionError::Kind::kConflict,
         s.pending.empty() ? "no pending candidates"
                           : "candidate index " + std::to_string(index) + " out of range (" +
                                 std::to_string(s.pending.size()) + " pending)");
  }
  Candidate c = std::move(s.pending[index]);
  s.timeline.push_back({Author::kMachine, std::move(c.frames), std::move(c.provenance)});
  s.pending.clear();
  s.updated_ms = now_ms();
  persist(s);
  return s;
}

MotionSequence SessionStore::export_timeline(const std::string& id, ExportSelection which) const {
  const Session s = get(id);
  MotionSequence out;
  out.fps = s.fps;
  out.joint_names = s.joint_names;
  for (const auto& seg : s.timeline) {
    const bool take = which == ExportSelection::kFull ||
                      (which == ExportSelection::kHumanOnly && seg.author == Author::kHuman) ||
                      (which == ExportSelection::kMachineOnly && seg.author == Author::kMachine);
    if (take) out.frames.insert(out.frames.end(), seg.frames.frames.begin(), seg.frames.frames.end());
  }
  if (out.frames.empty()) fail(SessionError::Kind::kConflict, "requested export selection is empty");
  return out;
}

MotionSequence SessionStore::reproduce(const std::string& id, std::size_t index) const {
  const Session s = get(id);
  if (index >= s.timeline.size() || !s.timeline[index].provenance) {
    fail(SessionError::Kind::kInvalid, "segment " + std::to_string(index) + " is not a machine segment");
  }
  const Provenance& p = *s.timeline[index].provenance;
  const LoadedModel lm = model(p.model_id);
  if (lm.checksum != p.model_checksum) {
    fail(SessionError::Kind::kConflict, "model '" + p.model_id + "' changed since generation");
  }
  MotionSequence warm = s.concatenated(index);
  if (warm.length() != p.warmup_frames) {
    fail(SessionError::Kind::kConflict, "timeline prefix does not match recorded warm-up length");
  }
  return rollout(*lm.model, warm, p.steps, p.policy);
}

}  // namespace chorrnn
