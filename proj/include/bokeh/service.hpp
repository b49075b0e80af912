#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <vector>

#include "bokeh/image.hpp"
#include "bokeh/synth.hpp"

namespace bokeh {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path store_dir = "store";
  std::size_t max_upload_bytes = 32u << 20;
  int render_timeout_ms = 10000;
  int max_concurrent_renders = 2;

  void validate() const;
};

struct StoredImage {
  std::string id;
  int width = 0;
  int height = 0;
};

/// Append-only directory store: <root>/<id>/{aif.png,disp.png}. The color
/// image is kept as canonical 8-bit PNG and the disparity as the normalized
/// 16-bit map, so every later render sees exactly the stored samples.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path root);

  std::vector<StoredImage> list() const;
  /// Validates both files (decodable, same size) and returns the new id.
  std::string add(std::span<const std::uint8_t> image, std::span<const std::uint8_t> disparity,
                  bool disparity_is_pfm = false);
  bool contains(const std::string& id) const;
  /// Throws std::out_of_range for unknown ids.
  Scene load(const std::string& id) const;
  std::filesystem::path aif_path(const std::string& id) const { return root_ / id / "aif.png"; }
  std::filesystem::path disparity_path(const std::string& id) const { return root_ / id / "disp.png"; }

 private:
  static bool valid_id(const std::string& id);

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::uint64_t next_ = 1;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Endpoint logic, independent of the HTTP transport.
///
///   GET  /api/images        -> {"images": [{"id", "width", "height"}]}
///   POST /api/upload        multipart fields "image", "disparity" -> {"id", "width", "height"}
///   POST /api/render        {"id", "focus": {...}, "intensity", ["beta"], ["gamma_aware"]} -> image/png
///                           focus: {"kind":"point","x","y"} | {"kind":"region","name"}
///                                  | {"kind":"disparity","value"}
///   POST /api/parse_prompt  {"prompt"} -> {"focus", "disparity"|null, "intensity"}
///
/// Errors: {"error": {"code", "message"}} with 400/404/413/500/503; prompt
/// parse errors add "position".
class Api {
 public:
  explicit Api(const ServiceConfig& config);

  ApiResponse images() const;
  ApiResponse upload(const std::string& image, const std::string& disparity,
                     const std::string& disparity_filename = "disp.png");
  ApiResponse render(const std::string& body) const;
  ApiResponse parse_prompt(const std::string& body) const;

  const ImageStore& store() const { return store_; }

 private:
  ServiceConfig config_;
  ImageStore store_;
  mutable std::counting_semaphore<> render_slots_;
};

ApiResponse error_response(int status, const std::string& code, const std::string& message);

/// HTTP/1.1 front end over Api.
class HttpService {
 public:
  explicit HttpService(const ServiceConfig& config);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds the socket; returns the bound port (useful with port 0).
  int bind();
  /// Serves until stop(); call bind() first.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bokeh
