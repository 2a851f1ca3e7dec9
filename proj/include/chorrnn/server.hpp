#ifndef CHORRNN_SERVER_HPP
#define CHORRNN_SERVER_HPP

#include <string>

#include "chorrnn/session.hpp"

namespace httplib {
class Server;
}

namespace chorrnn {

// Registers the session API on `server`:
//   POST /sessions                     {model_id}
//   GET  /sessions/{id}
//   POST /sessions/{id}/segments       {frames, fps?, joint_names?} or {sequence}
//   POST /sessions/{id}/candidates     {k, steps, policy: {mode, bias, seed}}
//   POST /sessions/{id}/accept         {index}
//   GET  /sessions/{id}/export?which=full|human_only|machine_only
//   GET  /models
// Errors are {code, message} with a 4xx status for client mistakes and 5xx
// for internal failures.
void mount_session_api(httplib::Server& server, SessionStore& store);

// Blocking. Returns false if the port could not be bound.
bool serve(SessionStore& store, const std::string& host, int port);

}  // namespace chorrnn

#endif  // CHORRNN_SERVER_HPP
