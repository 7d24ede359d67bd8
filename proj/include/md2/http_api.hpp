#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

// <resolv.h>, pulled in by httplib, defines _res, which Eigen uses as a parameter name.
#undef _res

#include "md2/session.hpp"

namespace md2 {

// Routes (all bodies JSON, every response carries "schema": kApiSchema):
//   GET  /api/v1/maps
//   POST /api/v1/sessions                     {"map": name}
//   GET  /api/v1/sessions/{id}
//   POST /api/v1/sessions/{id}/actions        {"action": "N" | "S" | "E" | "W" | "T:x,y"}
//   GET  /api/v1/sessions/{id}/prediction
//   POST /api/v1/sessions/{id}/finish
//   POST /api/v1/sessions/{id}/questionnaire  {"answers": [10 integers 0..4]}
//   GET  /api/v1/sessions/{id}/questionnaire
// Errors: {"schema": 1, "error": {"code": "...", "message": "..."}}.
inline constexpr int kApiSchema = 1;

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownMap:
    case ErrorCode::UnknownSession: return 404;
    case ErrorCode::SessionFinished: return 409;
    case ErrorCode::IllegalAction:
    case ErrorCode::InvalidResponse: return 422;
    case ErrorCode::NoModel: return 503;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

namespace detail {

inline void send_json(httplib::Response& res, int status, json body) {
  body["schema"] = kApiSchema;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), json{{"error", {{"code", to_string(code)}, {"message", message}}}});
}

inline json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body.empty() ? std::string("{}") : req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("request body is not JSON: ") + e.what());
  }
}

inline json session_json(const SessionService::Summary& s) {
  return {{"id", s.id}, {"map", s.mapName}, {"status", to_string(s.status)}, {"created_at", s.createdAt},
          {"state", state_view(s.state)}};
}

inline json persisted_json(const PersistedTrace& p) {
  return {{"session", p.sessionId}, {"file", p.file}, {"line", p.line}, {"outcome", to_string(p.outcome)},
          {"turns", p.turns}};
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, ErrorCode::MalformedRecord, e.what());
    } catch (const std::exception& e) {
      send_error(res, ErrorCode::Io, e.what());
    }
  };
}

}  // namespace detail

inline void mount_api(httplib::Server& server, SessionService& service) {
  using detail::guarded;
  using detail::send_json;
  using Req = httplib::Request;
  using Res = httplib::Response;

  server.Get("/api/v1/maps", guarded([&service](const Req&, Res& res) {
    send_json(res, 200, json{{"maps", service.list_maps()}, {"model", service.has_model()}});
  }));

  server.Post("/api/v1/sessions", guarded([&service](const Req& req, Res& res) {
    const auto body = detail::parse_body(req);
    if (!body.contains("map") || !body["map"].is_string())
      throw Error(ErrorCode::MalformedRecord, "expected {\"map\": name}");
    send_json(res, 201, detail::session_json(service.create_session(body["map"].get<std::string>())));
  }));

  server.Get("/api/v1/sessions/:id", guarded([&service](const Req& req, Res& res) {
    send_json(res, 200, detail::session_json(service.get_state(req.path_params.at("id"))));
  }));

  server.Post("/api/v1/sessions/:id/actions", guarded([&service](const Req& req, Res& res) {
    const auto body = detail::parse_body(req);
    if (!body.contains("action") || !body["action"].is_string())
      throw Error(ErrorCode::MalformedRecord, "expected {\"action\": \"N\"|\"S\"|\"E\"|\"W\"|\"T:x,y\"}");
    const auto reply = service.submit_action(req.path_params.at("id"), parse_action(body["action"].get<std::string>()));
    json events = json::array();
    for (const auto& e : reply.events) events.push_back(event_json(e));
    json out = {{"state", state_view(reply.state)}, {"events", events}};
    out["prediction"] = reply.prediction ? prediction_json(*reply.prediction) : json(nullptr);
    send_json(res, 200, std::move(out));
  }));

  server.Get("/api/v1/sessions/:id/prediction", guarded([&service](const Req& req, Res& res) {
    send_json(res, 200, prediction_json(service.prediction(req.path_params.at("id"))));
  }));

  server.Post("/api/v1/sessions/:id/finish", guarded([&service](const Req& req, Res& res) {
    send_json(res, 200, detail::persisted_json(service.finish_session(req.path_params.at("id"))));
  }));

  server.Post("/api/v1/sessions/:id/questionnaire", guarded([&service](const Req& req, Res& res) {
    const auto body = detail::parse_body(req);
    if (!body.contains("answers") || !body["answers"].is_array())
      throw Error(ErrorCode::InvalidResponse, "expected {\"answers\": [10 integers]}");
    std::vector<int> answers;
    for (const auto& a : body["answers"]) {
      if (!a.is_number_integer()) throw Error(ErrorCode::InvalidResponse, "answers must be integers");
      answers.push_back(a.get<int>());
    }
    const auto rec = service.submit_questionnaire(req.path_params.at("id"), answers);
    send_json(res, 201, json{{"session", rec.sessionId}, {"answers", answers}, {"scores", scores_json(rec.scores)}});
  }));

  server.Get("/api/v1/sessions/:id/questionnaire", guarded([&service](const Req& req, Res& res) {
    const auto rec = service.questionnaire(req.path_params.at("id"));
    if (!rec) throw Error(ErrorCode::UnknownSession, "no questionnaire stored for this session");
    std::vector<int> answers{rec->response.playFrequency};
    answers.insert(answers.end(), rec->response.answers.begin(), rec->response.answers.end());
    send_json(res, 200, json{{"session", rec->sessionId}, {"answers", answers}, {"scores", scores_json(rec->scores)}});
  }));
}

}  // namespace md2
