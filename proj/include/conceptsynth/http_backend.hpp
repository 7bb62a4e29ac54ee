#pragma once

#include <string>

#include "conceptsynth/backends.hpp"

namespace csynth {

// Splits "http://host:port/v1" into the origin ("http://host:port") and base path ("/v1").
struct EndpointUrl {
  std::string origin;
  std::string base_path;
};
EndpointUrl parse_endpoint(const std::string& endpoint);

// Client for OpenAI-compatible servers: POST {endpoint}/chat/completions and {endpoint}/embeddings.
// Connection errors, HTTP 429 and 5xx are retried with exponential backoff; other non-200 replies
// and unparseable bodies raise ProtocolError.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendDescriptor descriptor);

 protected:
  CompletionExchange do_complete(const std::string& prompt, const DecodeParams& params) override;
  EmbeddingBatch do_embed(const std::vector<std::string>& texts) override;

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  EndpointUrl url_;
};

}  // namespace csynth
