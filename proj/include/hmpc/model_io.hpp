#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "hmpc/coupled_model.hpp"
#include "hmpc/json_fields.hpp"

namespace hmpc {

// Plant file layout:
//   { "s1": {...}, "s2": {...}, "exogenous": [0, 0] }
// with each subsystem holding "dims" {nx, nu, ny, nv_in, nv_out, nw}, the matrices
// A B G F C D E Cv Dv Ev as arrays of rows, "U0"/"Y0" and optional labels.

inline json to_json(const SubsystemModel& m) {
    json j;
    j["name"] = m.name;
    j["dims"] = {{"nx", m.nx()}, {"nu", m.nu()}, {"ny", m.ny()}, {"nv_in", m.nv_in()}, {"nv_out", m.nv_out()}, {"nw", m.nw()}};
    const std::pair<const char*, const Matrix*> mats[] = {{"A", &m.A}, {"B", &m.B},   {"G", &m.G},   {"F", &m.F},
                                                          {"C", &m.C}, {"D", &m.D},   {"E", &m.E},   {"Cv", &m.Cv},
                                                          {"Dv", &m.Dv}, {"Ev", &m.Ev}};
    for (const auto& [key, mat] : mats) j[key] = codec::matrix_to_json(*mat);
    j["U0"] = codec::vector_to_json(m.U0);
    j["Y0"] = codec::vector_to_json(m.Y0);
    j["input_labels"] = m.input_labels;
    j["output_labels"] = m.output_labels;
    return j;
}

inline json to_json(const CoupledPlant& p) {
    json j;
    j["s1"] = to_json(p.s1);
    j["s2"] = to_json(p.s2);
    j["exogenous"] = {p.exogenous[0], p.exogenous[1]};
    return j;
}

namespace detail {

inline SubsystemModel subsystem_from_json(FieldReader r) {
    SubsystemModel m;
    m.name = r.string("name", "");
    FieldReader d = r.object("dims");
    const Index nx = d.integer("nx"), nu = d.integer("nu"), ny = d.integer("ny");
    const Index nv_in = d.integer("nv_in"), nv_out = d.integer("nv_out"), nw = d.integer("nw");
    d.finish();
    for (Index n : {nx, nu, ny, nv_in, nv_out, nw})
        if (n < 0) fail(ErrorCode::InvalidConfig, r.path("dims") + ": dimensions must be non-negative");

    const auto read = [&](const char* key, Index rows, Index cols) {
        Matrix mat = r.matrix(key, cols);
        if (mat.rows() == 0 && rows == 0) mat.resize(0, cols);
        if (mat.rows() != rows || mat.cols() != cols) {
            std::ostringstream os;
            os << r.path(key) << ": dimension mismatch, " << mat.rows() << "x" << mat.cols() << " given, " << rows << "x"
               << cols << " expected";
            fail(ErrorCode::DimensionMismatch, os.str());
        }
        return mat;
    };
    m.A = read("A", nx, nx);
    m.B = read("B", nx, nu);
    m.G = read("G", nx, nv_in);
    m.F = read("F", nx, nw);
    m.C = read("C", ny, nx);
    m.D = read("D", ny, nu);
    m.E = read("E", ny, nv_in);
    m.Cv = read("Cv", nv_out, nx);
    m.Dv = read("Dv", nv_out, nu);
    m.Ev = read("Ev", nv_out, nv_in);
    m.U0 = r.has("U0") ? r.vector("U0") : Vector::Zero(nu);
    m.Y0 = r.has("Y0") ? r.vector("Y0") : Vector::Zero(ny);
    m.input_labels = r.strings("input_labels");
    m.output_labels = r.strings("output_labels");
    r.finish();
    return m;
}

}  // namespace detail

/// Parses and validates a plant document; any validation issue is an error.
[[nodiscard]] inline CoupledPlant plant_from_json(const json& j) {
    FieldReader r(j, "");
    CoupledPlant p;
    p.s1 = detail::subsystem_from_json(r.object("s1"));
    p.s2 = detail::subsystem_from_json(r.object("s2"));
    if (const json* e = r.optional("exogenous")) {
        const Vector ev = FieldReader::as_vector(*e, r.path("exogenous"));
        if (ev.size() != 2) fail(ErrorCode::InvalidConfig, r.path("exogenous") + ": expected two channel counts");
        p.exogenous = {static_cast<Index>(ev(0)), static_cast<Index>(ev(1))};
    }
    r.finish();
    require_valid(p);
    return p;
}

[[nodiscard]] inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::InvalidConfig, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::InvalidConfig, path + ": " + e.what());
    }
}

[[nodiscard]] inline CoupledPlant load_plant(const std::string& path) {
    const json j = read_json_file(path);
    try {
        return plant_from_json(j);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.message());
    }
}

inline void save_plant(const CoupledPlant& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::InvalidConfig, "cannot write " + path);
    out << to_json(p).dump(2) << '\n';
}

}  // namespace hmpc
