// The only translation unit that compiles the HTTP library.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "cirlab/jsonl.hpp"
#include "cirlab/pipeline/services.hpp"
#include "cirlab/text.hpp"

#include <openssl/evp.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

namespace cirlab::data {

namespace {

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string image_data_url(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PermanentServiceError("cannot read image " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string ext = to_lower(path.extension().string());
  const char* mime = (ext == ".jpg" || ext == ".jpeg") ? "image/jpeg" : "image/png";
  return std::string("data:") + mime + ";base64," + base64(bytes);
}

}  // namespace

HttpChatClient::HttpChatClient(HttpServiceOptions options) : options_(std::move(options)) {
  if (options_.model.empty()) throw PermanentServiceError("HTTP service needs a model name");
  if (const char* key = std::getenv(options_.api_key_env.c_str())) api_key_ = key;
  if (api_key_.empty()) throw PermanentServiceError("environment variable " + options_.api_key_env + " is not set");
}

ServiceResponse HttpChatClient::complete(const ServiceRequest& request) {
  const auto started = std::chrono::steady_clock::now();
  Json content = Json::array({{{"type", "text"}, {"text", request.prompt}}});
  if (request.image)
    content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_data_url(*request.image)}}}});
  const Json body{{"model", options_.model},
                  {"max_tokens", request.max_tokens},
                  {"messages", Json::array({{{"role", "user"}, {"content", content}}})}};

  httplib::Client client(options_.base_url);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  client.set_bearer_token_auth(api_key_);
  const auto result = client.Post(options_.path, body.dump(), "application/json");
  if (!result) throw TransientServiceError("HTTP request failed: " + httplib::to_string(result.error()));
  const int status = result->status;
  if (status == 429 || status >= 500)
    throw TransientServiceError("HTTP " + std::to_string(status) + " from " + options_.base_url);
  if (status >= 400) throw PermanentServiceError("HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200));

  ServiceResponse response;
  try {
    const Json reply = Json::parse(result->body);
    response.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    if (reply.contains("usage")) {
      response.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
      response.completion_tokens = reply["usage"].value("completion_tokens", 0);
    }
  } catch (const Json::exception& e) {
    throw PermanentServiceError(std::string("malformed service reply: ") + e.what());
  }
  response.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return response;
}

}  // namespace cirlab::data
