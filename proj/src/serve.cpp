#include "layersep/serve.hpp"

#include "layersep/compositing.hpp"
#include "layersep/manifest.hpp"
#include "layersep/png_io.hpp"
#include "layersep/synthesis.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <sstream>

namespace layersep {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kPng = "image/png";
constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(ordered_json{{"error", message}}.dump(), kJson);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_mm(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::parse_error&) {
    throw ValidationError("body is not valid JSON");
  }
}

ShiftParams body_shifts(const json& body) {
  if (!body.is_object()) throw ValidationError("body must be a JSON object");
  if (!body.contains("shifts")) throw ValidationError("missing field 'shifts'");
  return shifts_from_json(body.at("shifts"));
}

}  // namespace

AnnotationService::AnnotationService(std::vector<JointCase> cases, std::filesystem::path annotation_store)
    : cases_(std::move(cases)), store_(std::move(annotation_store)), server_(std::make_unique<httplib::Server>()) {
  for (std::size_t i = 0; i < cases_.size(); ++i) {
    if (!index_.emplace(cases_[i].id, i).second) throw ValidationError("duplicate case id " + cases_[i].id);
  }
  for (const auto& a : load_annotations(store_)) latest_annotation_[a.case_id] = to_json(a).dump();
  install_routes();
}

AnnotationService::~AnnotationService() { stop(); }

bool AnnotationService::listen(const std::string& host, int port) { return server_->listen(host, port); }

int AnnotationService::bind_to_any_port(const std::string& host) { return server_->bind_to_any_port(host); }

bool AnnotationService::listen_after_bind() { return server_->listen_after_bind(); }

void AnnotationService::wait_until_ready() const { server_->wait_until_ready(); }

void AnnotationService::stop() {
  if (server_) server_->stop();
}

void AnnotationService::install_routes() {
  httplib::Server& s = *server_;

  // Resolves {id}; responds 404 and returns null when unknown.
  auto find_case = [this](const httplib::Request& req, httplib::Response& res) -> const JointCase* {
    const auto it = index_.find(req.path_params.at("id"));
    if (it == index_.end()) {
      send_error(res, 404, "unknown case '" + req.path_params.at("id") + "'");
      return nullptr;
    }
    return &cases_[it->second];
  };
  auto need_layers = [](const JointCase& c, httplib::Response& res) {
    if (c.layers) return true;
    send_error(res, 404, "case '" + c.id + "' has no separated layers");
    return false;
  };
  // Maps ValidationError to 400 and anything else to 500.
  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  };

  s.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Expose-Headers", "X-Jsw-Mm, X-Jsw-Delta-Mm");
  });
  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  s.Get("/cases", [this](const httplib::Request&, httplib::Response& res) {
    ordered_json list = ordered_json::array();
    for (const auto& c : cases_) {
      ordered_json e{{"id", c.id},
                     {"kind", to_string(c.kind)},
                     {"split", c.split},
                     {"rows", c.image.rows()},
                     {"cols", c.image.cols()},
                     {"pixel_spacing_mm", c.pixel_spacing_mm},
                     {"axis", {c.axis.x(), c.axis.y()}},
                     {"has_layers", c.layers.has_value()}};
      e["jsw_mm"] = c.jsw_mm ? json(*c.jsw_mm) : json(nullptr);
      list.push_back(std::move(e));
    }
    res.set_content(list.dump(), kJson);
  });

  s.Get("/cases/:id/image", guarded([=](const httplib::Request& req, httplib::Response& res) {
    if (const JointCase* c = find_case(req, res)) res.set_content(encode_png(c->image), kPng);
  }));

  s.Get("/cases/:id/reconstruction", guarded([=](const httplib::Request& req, httplib::Response& res) {
    const JointCase* c = find_case(req, res);
    if (c && need_layers(*c, res)) res.set_content(encode_png(reconstruct(*c->layers)), kPng);
  }));

  s.Get("/cases/:id/layers/:index", guarded([=](const httplib::Request& req, httplib::Response& res) {
    const JointCase* c = find_case(req, res);
    if (!c || !need_layers(*c, res)) return;
    const std::string& text = req.path_params.at("index");
    if (text.size() != 1 || text[0] < '0' || text[0] >= '0' + kNumLayers) {
      send_error(res, 404, "layer index must be 0, 1 or 2");
      return;
    }
    res.set_content(encode_png(c->layers->layers[text[0] - '0']), kPng);
  }));

  s.Post("/cases/:id/preview", guarded([=](const httplib::Request& req, httplib::Response& res) {
    const JointCase* c = find_case(req, res);
    if (!c || !need_layers(*c, res)) return;
    const ShiftParams shifts = body_shifts(parse_body(req));
    const double delta = displacement_difference_mm(shifts, c->pixel_spacing_mm, c->axis);
    res.set_header("X-Jsw-Delta-Mm", format_mm(delta));
    if (c->jsw_mm) res.set_header("X-Jsw-Mm", format_mm(*c->jsw_mm + delta));
    res.set_content(encode_png(synthesize(*c->layers, shifts)), kPng);
  }));

  s.Post("/cases/:id/annotation", guarded([this, find_case](const httplib::Request& req, httplib::Response& res) {
    const JointCase* c = find_case(req, res);
    if (!c) return;
    const json body = parse_body(req);
    AnnotationRecord a;
    a.case_id = c->id;
    a.shifts = body_shifts(body);
    a.jsw_mm = aligned_jsw_mm(a.shifts, c->pixel_spacing_mm, c->axis);
    if (body.contains("annotator")) {
      if (!body.at("annotator").is_string()) throw ValidationError("field 'annotator' must be a string");
      a.annotator = body.at("annotator").get<std::string>();
    }
    a.timestamp = utc_timestamp();
    const std::string text = to_json(a).dump();
    {
      std::lock_guard lock(store_mutex_);
      append_annotation(store_, a);
      latest_annotation_[a.case_id] = text;
    }
    res.status = 201;
    res.set_content(text, kJson);
  }));

  s.Get("/cases/:id/annotation", guarded([this, find_case](const httplib::Request& req, httplib::Response& res) {
    const JointCase* c = find_case(req, res);
    if (!c) return;
    std::lock_guard lock(store_mutex_);
    const auto it = latest_annotation_.find(c->id);
    if (it == latest_annotation_.end()) {
      send_error(res, 404, "no annotation for case '" + c->id + "'");
      return;
    }
    res.set_content(it->second, kJson);
  }));
}

}  // namespace layersep
