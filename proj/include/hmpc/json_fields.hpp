#pragma once

#include <set>
#include <string>
#include <utility>

#include "hmpc/protocol.hpp"

namespace hmpc {

/**
 * Strict reader for one JSON object. Every failure names the JSON pointer of the
 * offending field, and `finish()` rejects keys that were never read.
 */
class FieldReader {
public:
    FieldReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(ErrorCode::InvalidConfig, where() + ": expected an object");
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    [[nodiscard]] std::string path(const std::string& key) const { return path_ + "/" + key; }

    [[nodiscard]] const json& required(const std::string& key) {
        if (!j_.contains(key)) fail(ErrorCode::InvalidConfig, path(key) + ": missing required field");
        seen_.insert(key);
        return j_.at(key);
    }

    [[nodiscard]] const json* optional(const std::string& key) {
        if (!j_.contains(key)) return nullptr;
        seen_.insert(key);
        return &j_.at(key);
    }

    double number(const std::string& key) { return as_number(required(key), path(key)); }
    double number(const std::string& key, double fallback) {
        const json* v = optional(key);
        return v ? as_number(*v, path(key)) : fallback;
    }

    long integer(const std::string& key) { return as_integer(required(key), path(key)); }
    long integer(const std::string& key, long fallback) {
        const json* v = optional(key);
        return v ? as_integer(*v, path(key)) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        const json* v = optional(key);
        if (!v) return fallback;
        if (!v->is_boolean()) fail(ErrorCode::InvalidConfig, path(key) + ": expected true or false");
        return v->get<bool>();
    }

    std::string string(const std::string& key) { return as_string(required(key), path(key)); }
    std::string string(const std::string& key, std::string fallback) {
        const json* v = optional(key);
        return v ? as_string(*v, path(key)) : fallback;
    }

    Vector vector(const std::string& key) { return as_vector(required(key), path(key)); }

    Matrix matrix(const std::string& key, Index cols_hint = 0) { return as_matrix(required(key), path(key), cols_hint); }

    std::vector<std::string> strings(const std::string& key) {
        const json* v = optional(key);
        std::vector<std::string> out;
        if (!v) return out;
        if (!v->is_array()) fail(ErrorCode::InvalidConfig, path(key) + ": expected an array of strings");
        for (const auto& e : *v) out.push_back(as_string(e, path(key)));
        return out;
    }

    FieldReader object(const std::string& key) { return {required(key), path(key)}; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(ErrorCode::InvalidConfig, path(it.key()) + ": unknown field");
    }

    [[nodiscard]] const std::string& where() const { return path_.empty() ? root_ : path_; }

    static double as_number(const json& v, const std::string& at) {
        if (!v.is_number()) fail(ErrorCode::InvalidConfig, at + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(ErrorCode::InvalidConfig, at + ": expected a finite number");
        return d;
    }

    static long as_integer(const json& v, const std::string& at) {
        if (!v.is_number_integer()) fail(ErrorCode::InvalidConfig, at + ": expected an integer");
        return v.get<long>();
    }

    static std::string as_string(const json& v, const std::string& at) {
        if (!v.is_string()) fail(ErrorCode::InvalidConfig, at + ": expected a string");
        return v.get<std::string>();
    }

    static Vector as_vector(const json& v, const std::string& at) {
        if (!v.is_array()) fail(ErrorCode::InvalidConfig, at + ": expected an array of numbers");
        Vector out(static_cast<Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = as_number(v[i], at + "/" + std::to_string(i));
        return out;
    }

    static Matrix as_matrix(const json& v, const std::string& at, Index cols_hint = 0) {
        if (!v.is_array()) fail(ErrorCode::InvalidConfig, at + ": expected an array of rows");
        if (v.empty()) return Matrix(0, cols_hint);
        const Index cols = v[0].is_array() ? static_cast<Index>(v[0].size()) : -1;
        Matrix m(static_cast<Index>(v.size()), std::max<Index>(cols, 0));
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Vector row = as_vector(v[i], at + "/" + std::to_string(i));
            if (row.size() != cols) fail(ErrorCode::InvalidConfig, at + "/" + std::to_string(i) + ": ragged matrix row");
            m.row(static_cast<Index>(i)) = row.transpose();
        }
        return m;
    }

    /// Weight matrix of size n: a scalar (multiple of identity), {"diag": [...]} or rows.
    static Matrix as_weight(const json& v, const std::string& at, Index n) {
        Matrix m;
        if (v.is_number()) {
            m = as_number(v, at) * Matrix::Identity(n, n);
        } else if (v.is_object()) {
            FieldReader r(v, at);
            const Vector d = r.vector("diag");
            r.finish();
            m = d.asDiagonal();
        } else {
            m = as_matrix(v, at, n);
        }
        if (m.rows() != n || m.cols() != n) {
            fail(ErrorCode::InvalidConfig, at + ": expected a " + std::to_string(n) + "x" + std::to_string(n) + " weight, got " +
                                               std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        }
        return m;
    }

private:
    const json& j_;
    std::string path_;
    std::string root_ = "/";
    std::set<std::string> seen_;
};

}  // namespace hmpc
