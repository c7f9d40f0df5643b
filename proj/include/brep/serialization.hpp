#ifndef BREP_SERIALIZATION_HPP
#define BREP_SERIALIZATION_HPP

// JSON documents for models and generators, and a JSON writer that prints
// every real with 17 significant digits so values round-trip bit for bit.

#include "brep/models.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace brep {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

class FormatError : public Error {
 public:
  using Error::Error;
};

inline std::string format_real(double v) {
  if (!std::isfinite(v)) throw InvalidArgument("cannot serialize a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%#.17g", v);
  return buf;
}

namespace detail {

inline void write_json(std::ostream& os, const Json& j, int indent, int depth) {
  const auto newline = [&](int level) {
    if (indent < 0) return;
    os << '\n' << std::string(static_cast<std::size_t>(indent * level), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ',';
        first = false;
        newline(depth + 1);
        os << Json(it.key()).dump() << (indent < 0 ? ":" : ": ");
        write_json(os, it.value(), indent, depth + 1);
      }
      newline(depth);
      os << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      os << '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) os << (flat && indent >= 0 ? ", " : ",");
        first = false;
        if (!flat) newline(depth + 1);
        write_json(os, e, indent, depth + 1);
      }
      if (!flat) newline(depth);
      os << ']';
      return;
    }
    case Json::value_t::number_float:
      os << format_real(j.get<double>());
      return;
    default:
      os << j.dump();
      return;
  }
}

}  // namespace detail

/// Serializes with reals at 17 significant digits. indent < 0 gives one line.
inline std::string dump_json(const Json& j, int indent = 2) {
  std::ostringstream os;
  detail::write_json(os, j, indent, 0);
  return os.str();
}

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError("expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  if (!v.allFinite()) throw FormatError("non-finite number");
  return v;
}

namespace detail {

inline Json flat_row_major(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

inline Matrix matrix_from_flat(const Json& j, Eigen::Index rows, Eigen::Index cols) {
  const Vector flat = vector_from_json(j);
  if (flat.size() != rows * cols) throw FormatError("weight count does not match dims");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[r * cols + c];
  return m;
}

inline std::vector<Eigen::Index> dims_from_json(const Json& doc) {
  if (!doc.contains("dims") || !doc["dims"].is_array()) throw FormatError("missing dims");
  std::vector<Eigen::Index> dims;
  for (const auto& d : doc["dims"]) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw FormatError("dims must be positive integers");
    dims.push_back(static_cast<Eigen::Index>(d.get<std::size_t>()));
  }
  return dims;
}

inline void check_version(const Json& doc) {
  if (!doc.is_object()) throw FormatError("model document must be an object");
  if (!doc.contains("format_version") || doc["format_version"] != kModelFormatVersion) {
    throw FormatError("unsupported or missing format_version");
  }
}

}  // namespace detail

/// {"format_version", "kind", "dims", "weights" (row-major per layer),
///  "biases" (per layer), "nonlinearity"}.
inline Json model_to_json(const AnyClassifier& model) {
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  struct V {
    Json& doc;
    void operator()(const LinearSoftmaxClassifier& m) const {
      doc["kind"] = "linear";
      doc["dims"] = {m.input_dim(), m.num_classes()};
      doc["weights"] = Json::array({detail::flat_row_major(m.weights())});
      doc["biases"] = Json::array({to_json(m.biases())});
      doc["nonlinearity"] = "none";
    }
    void operator()(const MlpClassifier& m) const {
      doc["kind"] = "mlp";
      Json dims = Json::array({m.input_dim()});
      Json w = Json::array();
      Json b = Json::array();
      for (const auto& l : m.layers()) {
        dims.push_back(static_cast<std::size_t>(l.weights.rows()));
        w.push_back(detail::flat_row_major(l.weights));
        b.push_back(to_json(l.biases));
      }
      doc["dims"] = dims;
      doc["weights"] = w;
      doc["biases"] = b;
      doc["nonlinearity"] = "tanh";
    }
    void operator()(const QuadraticBallClassifier& m) const {
      doc["kind"] = "quadratic";
      doc["dims"] = {m.input_dim(), m.num_classes()};
      doc["weights"] = Json::array({to_json(m.center())});
      doc["biases"] = Json::array();
      doc["scale"] = m.scale();
      doc["nonlinearity"] = "quadratic";
    }
  };
  std::visit(V{doc}, model);
  return doc;
}

inline AnyClassifier model_from_json(const Json& doc) {
  detail::check_version(doc);
  const std::string kind = doc.value("kind", "");
  const auto dims = detail::dims_from_json(doc);
  if (!doc.contains("weights") || !doc["weights"].is_array()) throw FormatError("missing weights");
  if (!doc.contains("biases") || !doc["biases"].is_array()) throw FormatError("missing biases");
  const Json& w = doc["weights"];
  const Json& b = doc["biases"];
  try {
    if (kind == "linear") {
      if (dims.size() != 2 || w.size() != 1 || b.size() != 1) throw FormatError("linear model needs one layer");
      return LinearSoftmaxClassifier(detail::matrix_from_flat(w[0], dims[1], dims[0]), vector_from_json(b[0]));
    }
    if (kind == "mlp") {
      if (dims.size() < 2 || w.size() != dims.size() - 1 || b.size() != dims.size() - 1) {
        throw FormatError("mlp layer count does not match dims");
      }
      if (doc.value("nonlinearity", "") != "tanh") throw FormatError("unsupported nonlinearity");
      std::vector<MlpClassifier::Layer> layers;
      for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        layers.push_back({detail::matrix_from_flat(w[i], dims[i + 1], dims[i]), vector_from_json(b[i])});
      }
      return MlpClassifier(std::move(layers));
    }
    if (kind == "quadratic") {
      if (dims.size() != 2 || dims[1] != 2 || w.size() != 1) throw FormatError("malformed quadratic model");
      Vector center = vector_from_json(w[0]);
      if (center.size() != dims[0]) throw FormatError("center does not match dims");
      return QuadraticBallClassifier(std::move(center), doc.value("scale", 1.0));
    }
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(std::string("invalid model: ") + e.what());
  }
  throw FormatError("unknown model kind '" + kind + "'");
}

/// Generators share the document layout: dims = [latent, output].
inline Json generator_to_json(const AnyGenerator& g) {
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["dims"] = {g.latent_dim(), g.output_dim()};
  doc["nonlinearity"] = "none";
  if (const auto* a = std::get_if<AffineGenerator>(&g.variant())) {
    doc["kind"] = "affine_generator";
    doc["weights"] = Json::array({detail::flat_row_major(a->matrix())});
    doc["biases"] = Json::array({to_json(a->offset())});
  } else {
    doc["kind"] = "identity_generator";
    doc["weights"] = Json::array();
    doc["biases"] = Json::array();
  }
  return doc;
}

inline AnyGenerator generator_from_json(const Json& doc) {
  detail::check_version(doc);
  const std::string kind = doc.value("kind", "");
  const auto dims = detail::dims_from_json(doc);
  if (dims.size() != 2) throw FormatError("generator dims must be [latent, output]");
  if (kind == "identity_generator") {
    if (dims[0] != dims[1]) throw FormatError("identity generator needs equal dims");
    return IdentityGenerator(static_cast<std::size_t>(dims[0]));
  }
  if (kind == "affine_generator") {
    const Json& w = doc.at("weights");
    const Json& b = doc.at("biases");
    if (w.size() != 1 || b.size() != 1) throw FormatError("affine generator needs one layer");
    try {
      return AffineGenerator(detail::matrix_from_flat(w[0], dims[1], dims[0]), vector_from_json(b[0]));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& e) {
      throw FormatError(std::string("invalid generator: ") + e.what());
    }
  }
  throw FormatError("unknown generator kind '" + kind + "'");
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out << text;
  if (!out) throw std::ios_base::failure("write failed for " + path);
}

}  // namespace brep

#endif  // BREP_SERIALIZATION_HPP
