#pragma once

#include <json.hpp>

#include <string>

#include "hmpc/prediction.hpp"

namespace hmpc {

using json = nlohmann::json;

/// Coordinator -> subsystem message of the negotiation round.
struct NegotiationRequest {
    enum class Kind { Negotiate, Commit };
    Kind kind = Kind::Negotiate;
    long step = 0;
    long sigma = 0;
    Vector r;    ///< auxiliary set-point for the local MPC
    Vector r_d;  ///< central desired output deviation, used to evaluate J_s
    Profile v;   ///< presumed incoming coupling profile
};

/**
 * Subsystem -> coordinator reply. Carries only the emitted coupling profile and the
 * scalar central-cost contribution; no state, model, or control data can travel here.
 */
struct NegotiationResponse {
    enum class Kind { Reply, Committed, Error };
    Kind kind = Kind::Reply;
    long step = 0;
    long sigma = 0;
    Profile v_hat;
    double J = 0.0;
    std::string message;

    [[nodiscard]] bool is_error() const { return kind == Kind::Error; }

    static NegotiationResponse error(std::string msg, long step = 0, long sigma = 0) {
        NegotiationResponse r;
        r.kind = Kind::Error;
        r.step = step;
        r.sigma = sigma;
        r.message = std::move(msg);
        return r;
    }
};

/// Shape-only description a subsystem exposes to the coordinator.
struct SubsystemInfo {
    Index horizon = 0;
    Index setpoint_dim = 0;
    Index coupling_in = 0;   ///< width of the incoming coupling profile, exogenous channels included
    Index coupling_out = 0;  ///< width of the emitted coupling profile
};

// --- JSON codec -----------------------------------------------------------

namespace codec {

inline double finite_number(const json& j, const char* what) {
    if (!j.is_number()) fail(ErrorCode::ProtocolError, std::string("expected a number in ") + what);
    const double d = j.get<double>();
    if (!std::isfinite(d)) fail(ErrorCode::ProtocolError, std::string("non-finite number in ") + what);
    return d;
}

inline json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v(i))) fail(ErrorCode::NonFinite, "cannot serialise a non-finite value");
        a.push_back(v(i));
    }
    return a;
}

inline Vector vector_from_json(const json& j, const char* what) {
    if (!j.is_array()) fail(ErrorCode::ProtocolError, std::string("expected an array for ") + what);
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = finite_number(j[i], what);
    return v;
}

inline json matrix_to_json(const Matrix& m) {
    json a = json::array();
    for (Index i = 0; i < m.rows(); ++i) a.push_back(vector_to_json(m.row(i).transpose()));
    return a;
}

/// Row-major array of arrays. `cols_hint` sizes matrices with zero rows.
inline Matrix matrix_from_json(const json& j, const char* what, Index cols_hint = 0) {
    if (!j.is_array()) fail(ErrorCode::ProtocolError, std::string("expected an array of rows for ") + what);
    if (j.empty()) return Matrix(0, cols_hint);
    const auto cols = static_cast<Index>(j[0].size());
    Matrix m(static_cast<Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vector row = vector_from_json(j[i], what);
        if (row.size() != cols) fail(ErrorCode::ProtocolError, std::string("ragged rows in ") + what);
        m.row(static_cast<Index>(i)) = row.transpose();
    }
    return m;
}

/// Profiles travel as one array per horizon step.
inline json profile_to_json(const Profile& p) {
    json a = json::array();
    for (Index i = 0; i < p.horizon(); ++i) a.push_back(vector_to_json(p.at(i)));
    return a;
}

inline Profile profile_from_json(const json& j, Index width_hint = 0) {
    if (!j.is_array()) fail(ErrorCode::ProtocolError, "expected an array of profile steps");
    const auto N = static_cast<Index>(j.size());
    const Index width = N > 0 ? static_cast<Index>(j[0].size()) : width_hint;
    Profile p(N, width);
    for (Index i = 0; i < N; ++i) {
        const Vector row = vector_from_json(j[static_cast<std::size_t>(i)], "profile");
        if (row.size() != width) fail(ErrorCode::ProtocolError, "ragged profile");
        p.at(i) = row;
    }
    return p;
}

}  // namespace codec

inline json to_json(const NegotiationRequest& r) {
    json j;
    j["type"] = r.kind == NegotiationRequest::Kind::Negotiate ? "negotiate" : "commit";
    j["step"] = r.step;
    j["sigma"] = r.sigma;
    if (r.kind == NegotiationRequest::Kind::Negotiate) {
        j["r"] = codec::vector_to_json(r.r);
        j["r_d"] = codec::vector_to_json(r.r_d);
        j["v"] = codec::profile_to_json(r.v);
    }
    return j;
}

inline NegotiationRequest request_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        fail(ErrorCode::ProtocolError, "message without a type");
    NegotiationRequest r;
    const auto type = j["type"].get<std::string>();
    if (type == "negotiate") {
        r.kind = NegotiationRequest::Kind::Negotiate;
    } else if (type == "commit") {
        r.kind = NegotiationRequest::Kind::Commit;
    } else {
        fail(ErrorCode::ProtocolError, "unknown message type '" + type + "'");
    }
    r.step = j.value("step", 0L);
    r.sigma = j.value("sigma", 0L);
    if (r.kind == NegotiationRequest::Kind::Negotiate) {
        if (!j.contains("r") || !j.contains("r_d") || !j.contains("v"))
            fail(ErrorCode::ProtocolError, "negotiate message requires r, r_d and v");
        r.r = codec::vector_from_json(j["r"], "r");
        r.r_d = codec::vector_from_json(j["r_d"], "r_d");
        r.v = codec::profile_from_json(j["v"]);
    }
    return r;
}

inline json to_json(const NegotiationResponse& r) {
    json j;
    switch (r.kind) {
        case NegotiationResponse::Kind::Reply: j["type"] = "reply"; break;
        case NegotiationResponse::Kind::Committed: j["type"] = "committed"; break;
        case NegotiationResponse::Kind::Error: j["type"] = "error"; break;
    }
    j["step"] = r.step;
    j["sigma"] = r.sigma;
    if (r.kind == NegotiationResponse::Kind::Reply) {
        j["v_hat"] = codec::profile_to_json(r.v_hat);
        j["J"] = r.J;
    }
    if (r.kind == NegotiationResponse::Kind::Error) j["message"] = r.message;
    return j;
}

inline NegotiationResponse response_from_json(const json& j, Index width_hint = 0) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        fail(ErrorCode::ProtocolError, "message without a type");
    NegotiationResponse r;
    const auto type = j["type"].get<std::string>();
    r.step = j.value("step", 0L);
    r.sigma = j.value("sigma", 0L);
    if (type == "reply") {
        r.kind = NegotiationResponse::Kind::Reply;
        r.v_hat = codec::profile_from_json(j.at("v_hat"), width_hint);
        r.J = codec::finite_number(j.at("J"), "J");
    } else if (type == "committed") {
        r.kind = NegotiationResponse::Kind::Committed;
    } else if (type == "error") {
        r.kind = NegotiationResponse::Kind::Error;
        r.message = j.value("message", std::string{});
    } else {
        fail(ErrorCode::ProtocolError, "unknown response type '" + type + "'");
    }
    return r;
}

}  // namespace hmpc
