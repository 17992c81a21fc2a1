#pragma once

#include "birar/infodist.hpp"
#include "birar/retrieval.hpp"

namespace httplib {
class Server;
}

namespace birar {

// Shared immutable state behind the HTTP endpoints. The pointers must outlive
// the server; either may be null, in which case the matching endpoint answers
// 400 with an explanation.
struct ServiceDeps {
  const Bm25Index* index = nullptr;
  const LmProvider* provider = nullptr;
  NidVariant variant = NidVariant::PaperMinMin;
};

// Registers the versioned JSON-over-HTTP routes:
//   GET  /healthz               -> 200 {"status":"ok"}
//   POST /v1/score              -> RewardBreakdown for {trajectory, gold[, mode]}
//   POST /v1/retrieve           -> ranked docs for {query, k}
// Schema violations answer 400; internal faults answer 500 with an error id.
// Responses are produced by the same code paths as the in-process calls.
void register_routes(httplib::Server& server, ServiceDeps deps);

}  // namespace birar
