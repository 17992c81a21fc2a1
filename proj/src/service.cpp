#include "birar/service.hpp"

#include "birar/infodist.hpp"
#include "birar/json_io.hpp"
#include "birar/rng.hpp"

#include <atomic>
#include <string>

#include "httplib.h"
#include "json.hpp"

namespace birar {

namespace {

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void reply_error(httplib::Response& res, int status, const std::string& id,
                 const std::string& message) {
  nlohmann::json j = {{"error", {{"id", id}, {"message", message}}}};
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req) {
  nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw BadRequest("request body is not valid JSON");
  if (!body.is_object()) throw BadRequest("request body must be a JSON object");
  return body;
}

std::atomic<uint64_t> error_counter{0};

std::string next_error_id() {
  return "internal-" + std::to_string(error_counter.fetch_add(1) + 1);
}

}  // namespace

void register_routes(httplib::Server& server, ServiceDeps deps) {
  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json{{"status", "ok"}}.dump(), "application/json");
  });

  server.Post("/v1/score", [deps](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!deps.provider) throw BadRequest("scoring provider is not configured");
      const nlohmann::json body = parse_body(req);
      if (!body.contains("trajectory")) throw BadRequest("missing field 'trajectory'");
      if (!body.contains("gold") || !body["gold"].is_string())
        throw BadRequest("missing string field 'gold'");
      Trajectory traj;
      try {
        traj = trajectory_from_json(body["trajectory"]);
      } catch (const std::invalid_argument& e) {
        throw BadRequest(e.what());
      }
      const RewardBreakdown breakdown =
          score_trajectory(*deps.provider, traj, body["gold"].get<std::string>(), deps.variant);
      res.set_content(breakdown_to_json(breakdown).dump(), "application/json");
    } catch (const BadRequest& e) {
      reply_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, next_error_id(), e.what());
    }
  });

  server.Post("/v1/retrieve", [deps](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!deps.index) throw BadRequest("retrieval index is not configured");
      const nlohmann::json body = parse_body(req);
      if (!body.contains("query") || !body["query"].is_string())
        throw BadRequest("missing string field 'query'");
      if (!body.contains("k") || !body["k"].is_number_integer())
        throw BadRequest("missing integer field 'k'");
      const int k = body["k"].get<int>();
      if (k < 1) throw BadRequest("k must be >= 1");
      const auto results = deps.index->search(body["query"].get<std::string>(), k);
      nlohmann::json rows = nlohmann::json::array();
      for (const SearchResult& r : results)
        rows.push_back({{"doc_id", r.doc_id}, {"score", r.score}});
      res.set_content(nlohmann::json{{"results", std::move(rows)}}.dump(), "application/json");
    } catch (const BadRequest& e) {
      reply_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, next_error_id(), e.what());
    }
  });
}

}  // namespace birar
