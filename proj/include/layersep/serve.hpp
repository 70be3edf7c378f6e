#pragma once

// HTTP API behind the annotation tool. Case data is read-only after
// construction; annotations are appended to a JSON-lines file.

#include "layersep/config.hpp"
#include "layersep/joint_case.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace layersep {

class AnnotationService {
 public:
  AnnotationService(std::vector<JointCase> cases, std::filesystem::path annotation_store);
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Binds and serves until stop(). Returns false when binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it; serve with listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

 private:
  void install_routes();

  std::vector<JointCase> cases_;
  std::map<std::string, std::size_t> index_;
  std::filesystem::path store_;
  std::mutex store_mutex_;
  std::map<std::string, std::string> latest_annotation_;  ///< case id -> JSON text
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace layersep
