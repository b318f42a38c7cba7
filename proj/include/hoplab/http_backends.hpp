#pragma once

#include "hoplab/gateway.hpp"

namespace hoplab {

/// OpenAI-style JSON chat-completions adapter (POST {endpoint}/chat/completions).
/// The API key is read from the environment variable named in the config and
/// never stored or logged.
class OpenAiChatBackend : public ChatBackend {
public:
    Completion complete(const ModelConfig& cfg, const std::vector<Message>& messages,
                        const CallTag& tag) override;
};

/// Anthropic messages adapter (POST {endpoint}/v1/messages).
class AnthropicChatBackend : public ChatBackend {
public:
    Completion complete(const ModelConfig& cfg, const std::vector<Message>& messages,
                        const CallTag& tag) override;
};

/// OpenAI-style embeddings adapter (POST {endpoint}/embeddings).
class OpenAiEmbeddingBackend : public EmbeddingBackend {
public:
    std::vector<EmbeddingVector> embed(const ModelConfig& cfg,
                                       const std::vector<std::string>& texts) override;
};

} // namespace hoplab
