#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "conceptsynth/http_backend.hpp"

#include <algorithm>
#include <cstdlib>

namespace csynth {
namespace {

using nlohmann::json;

bool is_retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

EndpointUrl parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint \"" + endpoint + "\" lacks a scheme");
  const auto path_start = endpoint.find('/', scheme_end + 3);
  EndpointUrl url;
  url.origin = endpoint.substr(0, path_start);
  url.base_path = path_start == std::string::npos ? std::string{} : endpoint.substr(path_start);
  while (!url.base_path.empty() && url.base_path.back() == '/') url.base_path.pop_back();
  return url;
}

HttpBackend::HttpBackend(BackendDescriptor descriptor)
    : Backend(std::move(descriptor)), url_(parse_endpoint(this->descriptor().endpoint)) {}

json HttpBackend::post(const std::string& path, const json& body) const {
  const auto& d = descriptor();
  httplib::Headers headers;
  if (!d.api_key_env.empty()) {
    const char* token = std::getenv(d.api_key_env.c_str());
    if (token == nullptr) throw ConfigError("environment variable " + d.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const std::string payload = body.dump();
  const std::string target = url_.base_path + path;

  return with_retries<json>(d.params, "POST " + d.endpoint + path, [&]() -> json {
    httplib::Client client(url_.origin);
    const auto timeout = std::chrono::duration<double>(d.params.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto res = client.Post(target, headers, payload, "application/json");
    if (!res) throw TransientFailure("request failed: " + httplib::to_string(res.error()));
    if (is_retryable_status(res->status)) throw TransientFailure("HTTP " + std::to_string(res->status));
    if (res->status != 200) {
      throw ProtocolError("POST " + target + " returned HTTP " + std::to_string(res->status) + ": " +
                          res->body.substr(0, 200));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw ProtocolError("POST " + target + " returned a non-JSON body: " + e.what());
    }
  });
}

CompletionExchange HttpBackend::do_complete(const std::string& prompt, const DecodeParams& params) {
  const auto& d = descriptor();
  const json body{{"model", d.model_name},
                  {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
                  {"temperature", params.temperature.value_or(d.params.temperature)},
                  {"max_tokens", params.max_output_tokens.value_or(d.params.max_output_tokens)},
                  {"stream", false}};
  const json reply = post("/chat/completions", body);

  CompletionExchange ex;
  ex.prompt = prompt;
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    ex.output = content.is_null() ? std::string{} : content.get<std::string>();
    if (reply.contains("usage") && reply["usage"].is_object()) {
      ex.input_tokens = reply["usage"].value("prompt_tokens", std::int64_t{0});
      ex.output_tokens = reply["usage"].value("completion_tokens", std::int64_t{0});
    } else {
      ex.input_tokens = count_tokens(prompt);
      ex.output_tokens = count_tokens(ex.output);
    }
  } catch (const json::exception& e) {
    throw ProtocolError("malformed chat completion response: " + std::string(e.what()));
  }
  return ex;
}

EmbeddingBatch HttpBackend::do_embed(const std::vector<std::string>& texts) {
  const json body{{"model", descriptor().model_name}, {"input", texts}};
  const json reply = post("/embeddings", body);

  EmbeddingBatch batch;
  try {
    std::vector<std::pair<std::size_t, std::vector<float>>> indexed;
    for (const auto& item : reply.at("data")) {
      indexed.emplace_back(item.value("index", indexed.size()), item.at("embedding").get<std::vector<float>>());
    }
    std::sort(indexed.begin(), indexed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [i, v] : indexed) batch.vectors.push_back(std::move(v));
    if (reply.contains("usage") && reply["usage"].is_object()) {
      batch.usage.input_tokens = reply["usage"].value("prompt_tokens", std::int64_t{0});
    }
    batch.usage.calls = 1;
  } catch (const json::exception& e) {
    throw ProtocolError("malformed embeddings response: " + std::string(e.what()));
  }
  return batch;
}

}  // namespace csynth
