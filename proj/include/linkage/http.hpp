#pragma once

#include <string>

#include <httplib.h>

#include "linkage/service.hpp"

namespace linkage::service {

/// Routes every endpoint of `api` on `server`; static UI assets are mounted
/// at / when `static_dir` is non-empty.
inline void bind(httplib::Server& server, const Api& api, const std::string& static_dir = {}) {
  auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
    const Response r = api.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  for (const char* path : {"/simulate", "/operator/apply", "/mechanism/random", "/retrieve"}) {
    server.Post(path, forward);
    server.Get(path, forward);
  }
  server.Get("/health", forward);
  server.Post("/health", forward);
  if (!static_dir.empty()) server.set_mount_point("/", static_dir);
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const Response r = error(res.status, res.status == 404 ? "not_found" : "http_error",
                             "request to " + req.path + " failed");
    res.set_content(r.body.dump(), "application/json");
  });
}

}  // namespace linkage::service
