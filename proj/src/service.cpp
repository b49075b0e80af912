#include "bokeh/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

#include "bokeh/control.hpp"
#include "bokeh/png_io.hpp"
#include "bokeh/render.hpp"

namespace bokeh {

namespace fs = std::filesystem;
using nlohmann::json;

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw std::invalid_argument("port outside 0..65535");
  if (max_upload_bytes == 0) throw std::invalid_argument("upload limit must be positive");
  if (render_timeout_ms <= 0) throw std::invalid_argument("render timeout must be positive");
  if (max_concurrent_renders <= 0) throw std::invalid_argument("render concurrency must be positive");
}

// ---------------------------------------------------------------------------
// store

ImageStore::ImageStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  for (const auto& s : list()) {
    const auto n = std::strtoull(s.id.c_str() + 3, nullptr, 10);
    next_ = std::max<std::uint64_t>(next_, n + 1);
  }
}

bool ImageStore::valid_id(const std::string& id) {
  if (id.size() != 9 || id.compare(0, 3, "img") != 0) return false;
  return std::all_of(id.begin() + 3, id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<StoredImage> ImageStore::list() const {
  std::vector<StoredImage> out;
  for (const auto& entry : fs::directory_iterator(root_)) {
    const std::string id = entry.path().filename().string();
    if (!entry.is_directory() || !valid_id(id)) continue;
    try {
      const auto disp = load_disparity(disparity_path(id));
      out.push_back({id, disp.width(), disp.height()});
    } catch (const std::exception&) {
      // partially written or foreign directory: not listed
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

bool ImageStore::contains(const std::string& id) const {
  return valid_id(id) && fs::exists(aif_path(id)) && fs::exists(disparity_path(id));
}

std::string ImageStore::add(std::span<const std::uint8_t> image,
                            std::span<const std::uint8_t> disparity, bool disparity_is_pfm) {
  const ImagePlane decoded = decode_png(image);
  if (decoded.channels() != 3) throw std::invalid_argument("image must be color (RGB)");
  const ImagePlane aif = decode_png(encode_png(decoded));

  std::lock_guard lock(mutex_);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "img%06llu", static_cast<unsigned long long>(next_));
  const std::string id = buf;
  const fs::path staging = root_ / ("." + id + ".staging");
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    DisparityMap disp;
    if (disparity_is_pfm) {
      write_file(staging / "upload.pfm", disparity);
      disp = load_disparity(staging / "upload.pfm");
      fs::remove(staging / "upload.pfm");
    } else {
      disp = decode_disparity_png(disparity);
    }
    if (!disp.matches(aif)) throw std::invalid_argument("image and disparity sizes differ");
    save_image(aif, staging / "aif.png");
    save_disparity(quantize_disparity(disp), staging / "disp.png");
    fs::rename(staging, root_ / id);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  ++next_;
  return id;
}

Scene ImageStore::load(const std::string& id) const {
  if (!contains(id)) throw std::out_of_range("unknown image id '" + id + "'");
  return Scene{load_image(aif_path(id)), load_disparity(disparity_path(id))};
}

// ---------------------------------------------------------------------------
// api

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, "application/json", json{{"error", {{"code", code}, {"message", message}}}}.dump()};
}

namespace {

ApiResponse json_response(const json& j) { return {200, "application/json", j.dump()}; }

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

struct BadRequest : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

double number_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw BadRequest(std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

std::string string_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw BadRequest(std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BadRequest("request body must be a JSON object");
  return j;
}

double resolve_request_focus(const json& focus, const DisparityMap& disp) {
  if (!focus.is_object()) throw BadRequest("'focus' must be an object");
  const std::string kind = string_field(focus, "kind");
  if (kind == "point") {
    const double x = number_field(focus, "x");
    const double y = number_field(focus, "y");
    if (x != std::floor(x) || y != std::floor(y)) throw BadRequest("point coordinates must be integers");
    if (x < 0 || y < 0 || x >= disp.width() || y >= disp.height())
      throw BadRequest("point lies outside the image");
    return disp.at(static_cast<int>(x), static_cast<int>(y));
  }
  if (kind == "region") {
    const std::string name = string_field(focus, "name");
    BokehControl c;
    if (name == "foreground") c.focus = FocusRegion::Foreground;
    else if (name == "middle") c.focus = FocusRegion::Middle;
    else if (name == "background") c.focus = FocusRegion::Background;
    else throw BadRequest("unknown region '" + name + "'");
    return resolve_focus(c, disp);
  }
  if (kind == "disparity") {
    const double v = number_field(focus, "value");
    if (!(v >= 0.0 && v <= 1.0)) throw BadRequest("focal disparity must lie in [0,1]");
    return v;
  }
  throw BadRequest("unknown focus kind '" + kind + "'");
}

}  // namespace

Api::Api(const ServiceConfig& config)
    : config_(config), store_(config.store_dir), render_slots_(config.max_concurrent_renders) {
  config_.validate();
}

ApiResponse Api::images() const {
  json list = json::array();
  for (const auto& s : store_.list()) list.push_back({{"id", s.id}, {"width", s.width}, {"height", s.height}});
  return json_response({{"images", list}});
}

ApiResponse Api::upload(const std::string& image, const std::string& disparity,
                        const std::string& disparity_filename) {
  if (image.size() + disparity.size() > config_.max_upload_bytes)
    return error_response(413, "payload_too_large", "upload exceeds the configured limit");
  if (image.empty() || disparity.empty())
    return error_response(400, "bad_request", "both 'image' and 'disparity' parts are required");
  const bool pfm = fs::path(disparity_filename).extension() == ".pfm";
  try {
    const std::string id = store_.add(bytes_of(image), bytes_of(disparity), pfm);
    const auto disp = load_disparity(store_.disparity_path(id));
    return json_response({{"id", id}, {"width", disp.width()}, {"height", disp.height()}});
  } catch (const IoError& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

ApiResponse Api::render(const std::string& body) const {
  RenderParams params;
  Scene scene;
  try {
    const json j = parse_body(body);
    const std::string id = string_field(j, "id");
    if (!store_.contains(id)) return error_response(404, "not_found", "unknown image id '" + id + "'");
    scene = store_.load(id);
    if (!j.contains("focus")) throw BadRequest("'focus' is required");
    params.focal_disparity = resolve_request_focus(j["focus"], scene.disparity);
    params.intensity = number_field(j, "intensity");
    if (j.contains("beta")) params.occlusion_beta = number_field(j, "beta");
    if (j.contains("gamma_aware")) {
      if (!j["gamma_aware"].is_boolean()) throw BadRequest("'gamma_aware' must be a boolean");
      params.gamma_aware = j["gamma_aware"].get<bool>();
    }
    params.validate();
  } catch (const BadRequest& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::invalid_argument& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }

  if (!render_slots_.try_acquire_for(std::chrono::milliseconds(config_.render_timeout_ms)))
    return error_response(503, "busy", "render queue timed out");
  try {
    const ImagePlane out = render_tiled(scene.aif, scene.disparity, params);
    const auto png = encode_png(out);
    render_slots_.release();
    return {200, "image/png", std::string(png.begin(), png.end())};
  } catch (const std::exception& e) {
    render_slots_.release();
    return error_response(500, "render_failed", e.what());
  }
}

ApiResponse Api::parse_prompt(const std::string& body) const {
  try {
    const json j = parse_body(body);
    const BokehControl c = bokeh::parse_prompt(string_field(j, "prompt"));
    json out{{"focus", std::string(region_name(c.focus))}, {"intensity", c.intensity}};
    out["disparity"] = c.focus == FocusRegion::AtDisparity ? json(c.disparity) : json(nullptr);
    return json_response(out);
  } catch (const PromptError& e) {
    return {400, "application/json",
            json{{"error", {{"code", "parse_error"}, {"message", e.what()}, {"position", e.position()}}}}.dump()};
  } catch (const std::exception& e) {
    return error_response(400, "bad_request", e.what());
  }
}

// ---------------------------------------------------------------------------
// http

struct HttpService::Impl {
  explicit Impl(const ServiceConfig& c) : config(c), api(c) {}
  ServiceConfig config;
  Api api;
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpService::HttpService(const ServiceConfig& config) : impl_(std::make_unique<Impl>(config)) {
  auto& s = impl_->server;
  Api& api = impl_->api;
  s.set_payload_max_length(config.max_upload_bytes + (64u << 10));
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Get("/api/images", [&api](const httplib::Request&, httplib::Response& res) { send(res, api.images()); });
  s.Post("/api/upload", [&api](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("image") || !req.has_file("disparity")) {
      send(res, error_response(400, "bad_request", "expected multipart fields 'image' and 'disparity'"));
      return;
    }
    const auto disp = req.get_file_value("disparity");
    send(res, api.upload(req.get_file_value("image").content, disp.content,
                         disp.filename.empty() ? "disp.png" : disp.filename));
  });
  s.Post("/api/render", [&api](const httplib::Request& req, httplib::Response& res) {
    send(res, api.render(req.body));
  });
  s.Post("/api/parse_prompt", [&api](const httplib::Request& req, httplib::Response& res) {
    send(res, api.parse_prompt(req.body));
  });
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found"
                             : res.status == 413 ? "payload_too_large"
                                                 : "http_error";
    send(res, error_response(res.status, code, httplib::status_message(res.status)));
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string msg = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      msg = e.what();
    } catch (...) {
    }
    send(res, error_response(500, "internal", msg));
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind() {
  auto& s = impl_->server;
  if (impl_->config.port == 0) {
    const int port = s.bind_to_any_port(impl_->config.host);
    if (port < 0) throw std::runtime_error("could not bind a port on " + impl_->config.host);
    return port;
  }
  if (!s.bind_to_port(impl_->config.host, impl_->config.port))
    throw std::runtime_error("could not bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  return impl_->config.port;
}

void HttpService::run() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace bokeh
