// Copyright 2026 The CountPath Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP routes for ReviewService, all under /v1:
//
//   PUT  /v1/manifests/{id}                 manifest CSV body
//   PUT  /v1/macro-reports/{manifest_id}    macroscopic report CSV body
//   POST /v1/runs                           run a manifest, returns run_id
//   GET  /v1/runs/{id}/report               metrics and QC tallies
//   GET  /v1/runs/{id}/qc                   per-slide QC records
//   GET  /v1/runs/{id}/slides/{slide}/thumbnail.png
//   GET  /v1/review-queue?state=pending|resolved|all
//   GET  /v1/review/{item_id}
//   POST /v1/review/{item_id}/decision      {final_count, reviewer_id, note}
//   POST /v1/review/{item_id}/correction    same body, resolved items only

#pragma once

#include <string>

#include "httplib.h"

#include "countpath/service.hpp"

namespace countpath {

inline void send(httplib::Response& res, const ApiResult& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

inline json parse_body(const httplib::Request& req, bool& ok) {
  ok = true;
  try {
    return json::parse(req.body);
  } catch (const json::parse_error&) {
    ok = false;
    return nullptr;
  }
}

inline void mount_routes(httplib::Server& server, ReviewService& service) {
  server.Put(R"(/v1/manifests/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, service.put_manifest(req.matches[1], req.body));
  });
  server.Put(R"(/v1/macro-reports/([^/]+))",
             [&](const httplib::Request& req, httplib::Response& res) {
               send(res, service.put_macro_report(req.matches[1], req.body));
             });
  server.Post("/v1/runs", [&](const httplib::Request& req, httplib::Response& res) {
    bool ok = false;
    const auto body = parse_body(req, ok);
    if (!ok) return send(res, api_error(422, "body is not valid JSON"));
    send(res, service.create_run(body));
  });
  server.Get(R"(/v1/runs/([^/]+)/report)", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, service.run_report(req.matches[1]));
  });
  server.Get(R"(/v1/runs/([^/]+)/qc)", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, service.run_qc(req.matches[1]));
  });
  server.Get(R"(/v1/runs/([^/]+)/slides/([^/]+)/thumbnail\.png)",
             [&](const httplib::Request& req, httplib::Response& res) {
               std::string png;
               const auto r = service.thumbnail(req.matches[1], req.matches[2], png);
               if (r.status != 200) return send(res, r);
               res.status = 200;
               res.set_content(png, "image/png");
             });
  server.Get("/v1/review-queue", [&](const httplib::Request& req, httplib::Response& res) {
    const auto state = req.has_param("state") ? req.get_param_value("state") : "all";
    send(res, service.review_queue(state));
  });
  server.Get(R"(/v1/review/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, service.review_item(req.matches[1]));
  });
  server.Post(R"(/v1/review/([^/]+)/decision)",
              [&](const httplib::Request& req, httplib::Response& res) {
                bool ok = false;
                const auto body = parse_body(req, ok);
                if (!ok) return send(res, api_error(422, "body is not valid JSON"));
                send(res, service.decide(req.matches[1], body));
              });
  server.Post(R"(/v1/review/([^/]+)/correction)",
              [&](const httplib::Request& req, httplib::Response& res) {
                bool ok = false;
                const auto body = parse_body(req, ok);
                if (!ok) return send(res, api_error(422, "body is not valid JSON"));
                send(res, service.correct(req.matches[1], body));
              });
  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        send(res, api_error(500, what));
      });
}

}  // namespace countpath
