#include "kolmo/spec_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kolmo/error.hpp"

namespace kolmo {

namespace {

using nlohmann::json;

Matrix read_matrix(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].empty()) {
        throw Error(ErrorKind::Usage, std::string("spec: '") + key + "' must be a non-empty array of rows");
    }
    const auto& rows = j[key];
    const size_t cols = rows[0].is_array() ? rows[0].size() : 0;
    if (cols == 0) throw Error(ErrorKind::Usage, std::string("spec: '") + key + "' rows must be non-empty arrays");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].is_array() || rows[i].size() != cols) {
            throw Error(ErrorKind::Usage, std::string("spec: '") + key + "' is ragged");
        }
        for (size_t k = 0; k < cols; ++k) {
            if (!rows[i][k].is_number()) throw Error(ErrorKind::Usage, std::string("spec: '") + key + "' has a non-number");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k].get<double>();
        }
    }
    return m;
}

json write_matrix(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

OperatorSpec parse_spec(const std::string& json_text, const std::string& name) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Usage, std::string("spec: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::Usage, "spec: top level must be an object");
    for (const char* key : {"N", "m", "blocks"}) {
        if (!j.contains(key)) throw Error(ErrorKind::Usage, std::string("spec: missing '") + key + "'");
    }
    if (!j["N"].is_number_integer() || !j["m"].is_number_integer()) {
        throw Error(ErrorKind::Usage, "spec: 'N' and 'm' must be integers");
    }
    std::vector<int> blocks;
    if (!j["blocks"].is_array()) throw Error(ErrorKind::Usage, "spec: 'blocks' must be an array");
    for (const auto& b : j["blocks"]) {
        if (!b.is_number_integer()) throw Error(ErrorKind::Usage, "spec: block sizes must be integers");
        blocks.push_back(b.get<int>());
    }
    OperatorSpec spec = make_spec(read_matrix(j, "A"), read_matrix(j, "B"), blocks, name);
    if (spec.N != j["N"].get<int>() || spec.m != j["m"].get<int>()) {
        throw Error(ErrorKind::Dimension, "spec: 'N'/'m' disagree with the shapes of B/A");
    }
    return spec;
}

OperatorSpec load_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Usage, "cannot open spec file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string name = path;
    const auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    const auto dot = name.rfind(".json");
    if (dot != std::string::npos) name = name.substr(0, dot);
    return parse_spec(buf.str(), name);
}

std::string spec_to_json(const OperatorSpec& spec) {
    json j;
    j["N"] = spec.N;
    j["m"] = spec.m;
    j["A"] = write_matrix(spec.A);
    j["B"] = write_matrix(spec.B);
    j["blocks"] = spec.blocks.sizes;
    return j.dump();
}

bool is_named_spec(const std::string& name) {
    return name == "kolmogorov" || name == "ex41" || name == "ex42" || name == "heat1d" || name == "laplace2d" ||
           name == "kappa2";
}

OperatorSpec named_spec(const std::string& name) {
    if (name == "kolmogorov") {
        Matrix b(2, 2);
        b << 0, 0, -1, 0;
        return make_spec(Matrix::Identity(1, 1), b, {1, 1}, name);
    }
    if (name == "ex41") {
        Matrix b(2, 2);
        b << 0, 0, 1, 0;
        return make_spec(Matrix::Identity(1, 1), b, {1, 1}, name);
    }
    if (name == "ex42") {
        Matrix b(2, 2);
        b << 1, 0, 1, 0;
        return make_spec(Matrix::Identity(1, 1), b, {1, 1}, name);
    }
    if (name == "heat1d") return make_spec(Matrix::Identity(1, 1), Matrix::Zero(1, 1), {1}, name);
    if (name == "laplace2d") return make_spec(Matrix::Identity(2, 2), Matrix::Zero(2, 2), {2}, name);
    if (name == "kappa2") {
        Matrix b = Matrix::Zero(4, 4);
        b(2, 0) = 1.0;
        b(3, 2) = 1.0;
        return make_spec(Matrix::Identity(2, 2), b, {2, 1, 1}, name);
    }
    throw Error(ErrorKind::Usage, "unknown built-in spec '" + name + "'");
}

}  // namespace kolmo
