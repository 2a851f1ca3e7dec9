#include "chorrnn/server.hpp"

#include "httplib.h"

namespace chorrnn {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
  res.status = status;
  res.set_content(json{{"code", code}, {"message", msg}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

// Runs a handler, translating exceptions into the error envelope.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const SessionError& e) {
      switch (e.kind()) {
        case SessionError::Kind::kNotFound: send_error(res, 404, "not_found", e.what()); break;
        case SessionError::Kind::kConflict: send_error(res, 409, "conflict", e.what()); break;
        case SessionError::Kind::kTooLarge: send_error(res, 413, "too_large", e.what()); break;
        default: send_error(res, 400, "invalid_argument", e.what()); break;
      }
    } catch (const json::exception& e) {
      send_error(res, 400, "invalid_json", e.what());
    } catch (const DataError& e) {
      send_error(res, 400, "invalid_data", e.what());
    } catch (const ShapeError& e) {
      send_error(res, 400, "invalid_shape", e.what());
    } catch (const std::invalid_argument& e) {
      send_error(res, 400, "invalid_argument", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body);
  if (!body.is_object()) throw std::invalid_argument("request body must be a JSON object");
  return body;
}

MotionSequence segment_from_json(const json& body, const Session& session, std::size_t cap) {
  if (body.contains("sequence")) {
    return parse_sequence_text(body.at("sequence").get<std::string>(), "request body");
  }
  if (!body.contains("frames")) throw std::invalid_argument("body needs 'frames' or 'sequence'");
  const json& frames = body.at("frames");
  if (!frames.is_array()) throw std::invalid_argument("'frames' must be an array of arrays");
  if (frames.size() > cap) {
    throw SessionError(SessionError::Kind::kTooLarge,
                       "request has " + std::to_string(frames.size()) + " frames, limit is " +
                           std::to_string(cap));
  }
  MotionSequence seq;
  seq.fps = body.value("fps", session.fps > 0.0 ? session.fps : 30.0);
  for (const auto& f : frames) seq.frames.push_back(f.get<Vector>());
  if (body.contains("joint_names")) {
    seq.joint_names = body.at("joint_names").get<std::vector<std::string>>();
  } else if (!session.joint_names.empty()) {
    seq.joint_names = session.joint_names;
  } else {
    const std::size_t width = seq.frames.empty() ? 0 : seq.frames.front().size();
    if (width % 3 != 0) throw std::invalid_argument("frame width is not a multiple of 3");
    seq.joint_names = width == 75 ? kinect_joint_names() : generic_joint_names(width / 3);
  }
  return seq;
}

}  // namespace

void mount_session_api(httplib::Server& server, SessionStore& store) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/models", guarded([&store](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& m : store.list_models()) out.push_back(model_info_to_json(m));
    send_json(res, {{"models", out}});
  }));

  server.Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    if (!body.contains("model_id")) throw std::invalid_argument("body needs 'model_id'");
    send_json(res, session_to_json(store.create_session(body.at("model_id").get<std::string>())), 201);
  }));

  server.Get(R"(/sessions/([^/]+))",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               send_json(res, session_to_json(store.get(req.matches[1])));
             }));

  server.Post(R"(/sessions/([^/]+)/segments)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const json body = parse_body(req);
                const Session current = store.get(id);
                const MotionSequence seq =
                    segment_from_json(body, current, store.max_frames_per_request());
                send_json(res, session_to_json(store.add_human_segment(id, seq)));
              }));

  server.Post(R"(/sessions/([^/]+)/candidates)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const json body = parse_body(req);
                const auto k = body.value("k", std::size_t{1});
                const auto steps = body.value("steps", std::size_t{60});
                SamplingPolicy policy;
                if (body.contains("policy")) {
                  const json& p = body.at("policy");
                  policy.mode = parse_mode(p.value("mode", std::string("unbiased")));
                  policy.bias = p.value("bias", 0.0);
                  policy.seed = p.value("seed", std::uint64_t{0});
                }
                const auto candidates = store.generate_candidates(id, k, steps, policy);
                json list = json::array();
                for (std::size_t i = 0; i < candidates.size(); ++i) {
                  list.push_back({{"index", i},
                                  {"provenance", provenance_to_json(candidates[i].provenance)},
                                  {"frames", frames_to_json(candidates[i].frames)}});
                }
                send_json(res, {{"session", session_to_json(store.get(id))}, {"candidates", list}});
              }));

  server.Post(R"(/sessions/([^/]+)/accept)",
              guarded([&store](const httplib::Request& req, httplib::Response& res) {
                const json body = parse_body(req);
                if (!body.contains("index")) throw std::invalid_argument("body needs 'index'");
                const auto index = body.at("index").get<long long>();
                if (index < 0) throw std::invalid_argument("index must be >= 0");
                send_json(res, session_to_json(store.accept_candidate(
                                   req.matches[1], static_cast<std::size_t>(index))));
              }));

  server.Get(R"(/sessions/([^/]+)/export)",
             guarded([&store](const httplib::Request& req, httplib::Response& res) {
               const std::string which =
                   req.has_param("which") ? req.get_param_value("which") : std::string("full");
               const MotionSequence seq =
                   store.export_timeline(req.matches[1], parse_export_selection(which));
               res.set_header("Content-Disposition",
                              "attachment; filename=\"" + std::string(req.matches[1]) + "_" + which + ".seq\"");
               res.set_content(sequence_to_text(seq), "text/plain");
             }));
}

bool serve(SessionStore& store, const std::string& host, int port) {
  httplib::Server server;
  mount_session_api(server, store);
  return server.listen(host, port);
}

}  // namespace chorrnn
