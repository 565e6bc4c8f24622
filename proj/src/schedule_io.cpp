#include "mobilectl/schedule_io.hpp"

#include "mobilectl/error.hpp"

namespace mobilectl {

namespace {

using nlohmann::json;

json table_to_json(const SampledField& t) {
    return json{{"nodes", t.nodes}, {"times", t.times}, {"values", t.values}};
}

SampledField table_from_json(const json& j) {
    SampledField t;
    t.nodes = j.at("nodes").get<std::vector<double>>();
    t.times = j.at("times").get<std::vector<double>>();
    t.values = j.at("values").get<std::vector<std::vector<double>>>();
    if (t.values.size() != t.times.size()) throw_invalid("field table: one row per time sample expected");
    for (const auto& row : t.values) {
        if (row.size() != t.nodes.size()) throw_invalid("field table: row length must match node count");
    }
    return t;
}

json field_to_json(const Field& f, const ControlStage& stage, const SpatialGrid& grid, int time_samples) {
    if (const auto* tab = f.table()) return table_to_json(*tab);
    std::vector<double> times;
    for (int k = 0; k <= time_samples; ++k) {
        times.push_back(stage.t_start + (stage.t_end - stage.t_start) * k / time_samples);
    }
    return table_to_json(sample_field(f, grid.nodes(), std::move(times)));
}

}  // namespace

nlohmann::json schedule_to_json(const ControlSchedule& schedule, const SpatialGrid& grid, int time_samples) {
    json stages = json::array();
    for (const auto& s : schedule.stages()) {
        json payload{{"kind", payload_tag(s.payload)}};
        if (const auto* cm = std::get_if<ConstMultiplicative>(&s.payload)) {
            payload["m"] = cm->m;
        } else if (const auto* fm = std::get_if<FieldMultiplicative>(&s.payload)) {
            payload["field"] = field_to_json(fm->u, s, grid, time_samples);
        } else if (const auto* fa = std::get_if<FieldAdditive>(&s.payload)) {
            payload["field"] = field_to_json(fa->v, s, grid, time_samples);
        }
        stages.push_back(json{{"t_start", s.t_start},
                              {"t_end", s.t_end},
                              {"r", s.window.r},
                              {"l", s.window.l},
                              {"payload", std::move(payload)}});
    }
    return json{{"schema", kScheduleSchema}, {"id", schedule.id()}, {"stages", std::move(stages)}};
}

ControlSchedule schedule_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("schema").get<std::string>() != kScheduleSchema) {
            throw_invalid("unsupported schedule schema " + doc.at("schema").dump());
        }
        std::vector<ControlStage> stages;
        for (const auto& js : doc.at("stages")) {
            ControlStage s;
            s.t_start = js.at("t_start").get<double>();
            s.t_end = js.at("t_end").get<double>();
            s.window = Window(js.at("r").get<double>(), js.at("l").get<double>());
            const auto& p = js.at("payload");
            const auto kind = p.at("kind").get<std::string>();
            if (kind == "idle") {
                s.payload = Idle{};
            } else if (kind == "const_multiplicative") {
                s.payload = ConstMultiplicative{p.at("m").get<double>()};
            } else if (kind == "field_multiplicative") {
                s.payload = FieldMultiplicative{Field(table_from_json(p.at("field")))};
            } else if (kind == "field_additive") {
                s.payload = FieldAdditive{Field(table_from_json(p.at("field")))};
            } else {
                throw_invalid("unknown payload kind '" + kind + "'");
            }
            stages.push_back(std::move(s));
        }
        return ControlSchedule(std::move(stages), doc.value("id", std::string{}));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed schedule document: ") + e.what());
    }
}

std::string dump_json(const nlohmann::json& doc) { return doc.dump(2); }

}  // namespace mobilectl
