// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <string>

#include "httplib.h"

#include "ddose/agent.hpp"

namespace ddose::agent {

using nlohmann::json;

AgentMessage HttpChatBackend::next(const std::string& prompt, const AgentTranscript& so_far) {
    json messages = json::array();
    messages.push_back({{"role", "user"}, {"content", prompt}});
    for (const auto& step : so_far.steps) {
        messages.push_back({{"role", "assistant"}, {"content", step.agent_message}});
        if (!step.tool_results.empty()) {
            json results = json::array();
            for (const auto& r : step.tool_results) results.push_back(r);
            messages.push_back({{"role", "user"}, {"content", results.dump()}});
        }
    }
    const json body = {{"model", options_.model},
                       {"temperature", 0},
                       {"messages", messages}};

    AgentMessage msg;
    httplib::Client client(options_.host, options_.port);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    auto res = client.Post(options_.path, body.dump(), "application/json");
    if (!res || res->status != 200) {
        // A transport failure may not loop: surface it and stop the run.
        msg.text = fmt::format("Backend request failed ({}). <DONE>",
                               res ? fmt::format("status {}", res->status) : "no response");
        return msg;
    }
    const json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
        msg.text = "Backend returned an unparseable reply. <DONE>";
        return msg;
    }
    msg.text = reply["choices"][0].value("message", json::object()).value("content", "");
    msg.tool_calls = parse_tool_calls_from_text(msg.text);
    return msg;
}

}  // namespace ddose::agent
