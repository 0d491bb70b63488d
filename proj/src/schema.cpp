#include "latticespin/runner.hpp"

#include <cmath>
#include <string>

namespace latticespin {

namespace {

constexpr const char* kSchema = R"json({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "latticespin experiment config",
  "type": "object",
  "required": ["seed", "model", "experiment"],
  "additionalProperties": false,
  "properties": {
    "seed": {"type": "integer", "minimum": 0},
    "output": {"type": "string"},
    "threads": {"type": "integer", "minimum": 1},
    "require_valid": {"type": "boolean"},
    "model": {"$ref": "#/$defs/model"},
    "weights": {"$ref": "#/$defs/weights"},
    "experiment": {
      "type": "object",
      "minProperties": 1,
      "maxProperties": 1,
      "additionalProperties": false,
      "properties": {
        "validate": {"$ref": "#/$defs/validate"},
        "simulate": {"$ref": "#/$defs/simulate"},
        "invariant": {"$ref": "#/$defs/invariant"},
        "decay": {"$ref": "#/$defs/decay"},
        "converge": {"$ref": "#/$defs/converge"},
        "tails": {"$ref": "#/$defs/tails"},
        "lyapunov": {"$ref": "#/$defs/lyapunov"},
        "hormander": {"$ref": "#/$defs/hormander"},
        "control": {"$ref": "#/$defs/control"},
        "periodic": {"$ref": "#/$defs/periodic"}
      }
    }
  },
  "$defs": {
    "vector": {"type": "array", "items": {"type": "number"}},
    "positive": {"type": "number", "exclusiveMinimum": 0},
    "count": {"type": "integer", "minimum": 1},
    "volumes": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
    "scheme": {"enum": ["euler", "tamed"]},
    "backend": {"enum": ["serial", "openmp"]},
    "constants": {
      "type": "object",
      "required": ["eta", "lambda", "theta", "eta0"],
      "additionalProperties": false,
      "properties": {
        "eta": {"type": "number", "minimum": 0},
        "lambda": {"type": "number"},
        "theta": {"type": "number", "minimum": 1},
        "eta0": {"type": "number", "minimum": 0}
      }
    },
    "drift": {
      "type": "object",
      "required": ["kind", "constants"],
      "additionalProperties": false,
      "properties": {
        "kind": {"enum": ["linear", "cubic", "tanh"]},
        "slope": {"type": "number"},
        "alpha": {"type": "number"},
        "beta": {"type": "number"},
        "gamma": {"type": "number"},
        "kappa": {"type": "number"},
        "constants": {"$ref": "#/$defs/constants"},
        "forcing": {
          "type": "object",
          "required": ["amplitude", "period"],
          "additionalProperties": false,
          "properties": {
            "amplitude": {"type": "number"},
            "period": {"$ref": "#/$defs/positive"},
            "phase": {"type": "number"}
          }
        }
      }
    },
    "coupling": {
      "type": "object",
      "required": ["kind"],
      "additionalProperties": false,
      "properties": {
        "kind": {"enum": ["constant", "sinusoidal", "table"]},
        "sub": {"type": ["number", "array"], "items": {"type": "number"}},
        "super": {"type": ["number", "array"], "items": {"type": "number"}},
        "sub_amp": {"type": "number"},
        "super_amp": {"type": "number"},
        "period": {"$ref": "#/$defs/positive"},
        "phase": {"type": "number"},
        "bound": {"type": "number", "minimum": 0}
      }
    },
    "model": {
      "type": "object",
      "required": ["volume", "drift", "coupling"],
      "additionalProperties": false,
      "properties": {
        "volume": {"$ref": "#/$defs/count"},
        "drift": {"$ref": "#/$defs/drift"},
        "coupling": {"$ref": "#/$defs/coupling"}
      }
    },
    "site_weight": {
      "type": "object",
      "required": ["kind"],
      "additionalProperties": false,
      "properties": {
        "kind": {"enum": ["exponential", "polynomial", "table"]},
        "kappa": {"$ref": "#/$defs/positive"},
        "exponent": {"type": "number", "exclusiveMinimum": 1},
        "values": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/positive"}}
      }
    },
    "weights": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "rho": {"$ref": "#/$defs/site_weight"},
        "v": {"$ref": "#/$defs/site_weight"},
        "range": {"$ref": "#/$defs/count"},
        "ratio_bound": {"$ref": "#/$defs/positive"},
        "lower_rate": {"$ref": "#/$defs/positive"},
        "lower_scale": {"$ref": "#/$defs/positive"},
        "sup_ratio_bound": {"$ref": "#/$defs/positive"}
      }
    },
    "validate": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "z_max": {"$ref": "#/$defs/positive"},
        "z_points": {"type": "integer", "minimum": 2},
        "t_points": {"$ref": "#/$defs/count"},
        "sites": {"$ref": "#/$defs/count"}
      }
    },
    "simulate": {
      "type": "object",
      "required": ["horizon"],
      "additionalProperties": false,
      "properties": {
        "x0": {"$ref": "#/$defs/vector"},
        "horizon": {"$ref": "#/$defs/positive"},
        "h": {"$ref": "#/$defs/positive"},
        "scheme": {"$ref": "#/$defs/scheme"},
        "start_time": {"type": "number"},
        "stream": {"type": "integer", "minimum": 0}
      }
    },
    "invariant": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "x0": {"$ref": "#/$defs/vector"},
        "burn_in": {"type": "number", "minimum": 0},
        "n_samples": {"$ref": "#/$defs/count"},
        "thinning": {"$ref": "#/$defs/positive"},
        "h": {"$ref": "#/$defs/positive"},
        "scheme": {"$ref": "#/$defs/scheme"},
        "bins": {"$ref": "#/$defs/count"}
      }
    },
    "decay": {
      "type": "object",
      "required": ["x", "y", "times", "replicas"],
      "additionalProperties": false,
      "properties": {
        "x": {"$ref": "#/$defs/vector"},
        "y": {"$ref": "#/$defs/vector"},
        "times": {"type": "array", "minItems": 2, "items": {"type": "number", "minimum": 0}},
        "replicas": {"$ref": "#/$defs/count"},
        "h": {"$ref": "#/$defs/positive"},
        "scheme": {"$ref": "#/$defs/scheme"},
        "backend": {"$ref": "#/$defs/backend"},
        "bins": {"$ref": "#/$defs/count"}
      }
    },
    "converge": {
      "type": "object",
      "required": ["k", "volumes", "T1", "replicas"],
      "additionalProperties": false,
      "properties": {
        "k": {"$ref": "#/$defs/count"},
        "volumes": {"$ref": "#/$defs/volumes"},
        "x": {"$ref": "#/$defs/vector"},
        "T1": {"$ref": "#/$defs/positive"},
        "replicas": {"$ref": "#/$defs/count"},
        "h": {"$ref": "#/$defs/positive"},
        "scheme": {"$ref": "#/$defs/scheme"},
        "backend": {"$ref": "#/$defs/backend"}
      }
    },
    "tails": {
      "type": "object",
      "required": ["volumes", "t", "n0", "replicas"],
      "additionalProperties": false,
      "properties": {
        "volumes": {"$ref": "#/$defs/volumes"},
        "x": {"$ref": "#/$defs/vector"},
        "t": {"type": "number", "minimum": 0},
        "n0": {"$ref": "#/$defs/volumes"},
        "replicas": {"$ref": "#/$defs/count"},
        "h": {"$ref": "#/$defs/positive"},
        "scheme": {"$ref": "#/$defs/scheme"},
        "backend": {"$ref": "#/$defs/backend"},
        "tightness": {
          "type": "object",
          "required": ["volumes", "eps"],
          "additionalProperties": false,
          "properties": {
            "volumes": {"$ref": "#/$defs/volumes"},
            "eps": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/positive"}},
            "burn_in": {"type": "number", "minimum": 0},
            "n_samples": {"$ref": "#/$defs/count"},
            "thinning": {"$ref": "#/$defs/positive"},
            "h": {"$ref": "#/$defs/positive"}
          }
        }
      }
    },
    "lyapunov": {
      "type": "object",
      "required": ["shape"],
      "additionalProperties": false,
      "properties": {
        "shape": {"enum": ["unit", "weighted", "custom"]},
        "theta": {"type": "number", "minimum": 1},
        "weights": {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/positive"}},
        "offset": {"type": "number", "minimum": 0},
        "c": {"$ref": "#/$defs/positive"},
        "C": {"type": "number", "minimum": 0},
        "samples": {"$ref": "#/$defs/count"},
        "radius": {"$ref": "#/$defs/positive"},
        "heavy_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "cauchy_scale": {"$ref": "#/$defs/positive"},
        "t": {"type": "number"},
        "perturb": {"$ref": "#/$defs/positive"}
      }
    },
    "hormander": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "states": {"$ref": "#/$defs/count"},
        "scale": {"$ref": "#/$defs/positive"},
        "numeric": {"type": "boolean"},
        "fd_step": {"$ref": "#/$defs/positive"},
        "zero_sub": {"type": "integer", "minimum": 2}
      }
    },
    "control": {
      "type": "object",
      "required": ["x", "z", "T"],
      "additionalProperties": false,
      "properties": {
        "x": {"$ref": "#/$defs/vector"},
        "z": {"$ref": "#/$defs/vector"},
        "T": {"$ref": "#/$defs/positive"},
        "samples": {"type": "integer", "minimum": 4},
        "rk_step": {"$ref": "#/$defs/positive"}
      }
    },
    "periodic": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "phases": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "burn_cycles": {"type": "integer", "minimum": 0},
        "cycles": {"$ref": "#/$defs/count"},
        "h": {"$ref": "#/$defs/positive"},
        "scheme": {"$ref": "#/$defs/scheme"},
        "Q": {"$ref": "#/$defs/count"},
        "transport": {
          "type": "object",
          "required": ["s", "t", "replicas"],
          "additionalProperties": false,
          "properties": {
            "s": {"type": "number"},
            "t": {"type": "number"},
            "replicas": {"$ref": "#/$defs/count"},
            "backend": {"$ref": "#/$defs/backend"}
          }
        }
      }
    }
  }
})json";

using nlohmann::json;

bool has_type(const json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "number") return v.is_number();
    if (t == "integer") {
        if (v.is_number_integer()) return true;
        if (!v.is_number_float()) return false;
        const double d = v.get<double>();
        return std::isfinite(d) && d == std::floor(d);
    }
    return false;
}

/// Validates against the subset of JSON Schema used above.
void check_node(const json& root, const json& schema, const json& v, const std::string& path,
                std::vector<ConfigIssue>& out) {
    const std::string where = path.empty() ? "/" : path;
    if (auto ref = schema.find("$ref"); ref != schema.end()) {
        const std::string target = ref->get<std::string>();
        check_node(root, root.at(json::json_pointer(target.substr(1))), v, path, out);
        return;
    }
    if (auto t = schema.find("type"); t != schema.end()) {
        bool ok = false;
        std::string names;
        if (t->is_string()) {
            ok = has_type(v, t->get<std::string>());
            names = t->get<std::string>();
        } else {
            for (const auto& one : *t) {
                ok = ok || has_type(v, one.get<std::string>());
                names += (names.empty() ? "" : " or ") + one.get<std::string>();
            }
        }
        if (!ok) {
            out.push_back({where, "expected " + names});
            return;
        }
    }
    if (auto e = schema.find("enum"); e != schema.end()) {
        bool found = false;
        for (const auto& option : *e) found = found || option == v;
        if (!found) out.push_back({where, "must be one of " + e->dump()});
    }
    if (v.is_number()) {
        const double d = v.get<double>();
        if (auto m = schema.find("minimum"); m != schema.end() && d < m->get<double>())
            out.push_back({where, "must be >= " + m->dump()});
        if (auto m = schema.find("exclusiveMinimum"); m != schema.end() && !(d > m->get<double>()))
            out.push_back({where, "must be > " + m->dump()});
        if (auto m = schema.find("maximum"); m != schema.end() && d > m->get<double>())
            out.push_back({where, "must be <= " + m->dump()});
    }
    if (v.is_array()) {
        if (auto m = schema.find("minItems"); m != schema.end() && v.size() < m->get<std::size_t>())
            out.push_back({where, "needs at least " + m->dump() + " items"});
        if (auto items = schema.find("items"); items != schema.end())
            for (std::size_t i = 0; i < v.size(); ++i) check_node(root, *items, v[i], path + "/" + std::to_string(i), out);
    }
    if (v.is_object()) {
        if (auto m = schema.find("minProperties"); m != schema.end() && v.size() < m->get<std::size_t>())
            out.push_back({where, "needs at least " + m->dump() + " entries"});
        if (auto m = schema.find("maxProperties"); m != schema.end() && v.size() > m->get<std::size_t>())
            out.push_back({where, "allows at most " + m->dump() + " entries"});
        if (auto req = schema.find("required"); req != schema.end())
            for (const auto& key : *req)
                if (!v.contains(key.get<std::string>())) out.push_back({path + "/" + key.get<std::string>(), "is required"});
        const auto props = schema.find("properties");
        const bool closed = schema.value("additionalProperties", true) == false;
        for (const auto& [key, value] : v.items()) {
            const std::string child = path + "/" + key;
            if (props != schema.end() && props->contains(key)) check_node(root, (*props)[key], value, child, out);
            else if (closed) out.push_back({child, "is not a recognized key"});
        }
    }
}

} // namespace

const nlohmann::json& config_schema() {
    static const json schema = json::parse(kSchema);
    return schema;
}

std::vector<ConfigIssue> check_config(const nlohmann::json& config) {
    std::vector<ConfigIssue> out;
    const auto& schema = config_schema();
    check_node(schema, schema, config, "", out);
    return out;
}

} // namespace latticespin
