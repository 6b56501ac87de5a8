#pragma once

// Command-line front end:
//
//   oculab simulate  [--test K] [--preset P] [--config F] [--seed N] [--patient ID] [--live [--realtime]]
//   oculab analyze   (--session ID | --samples F [--test K] [--config F]) [--chart precision [--svg F]]
//   oculab classify  (--session ID | --report F) [--config F]
//   oculab trend     --patient ID --metric NAME
//   oculab import    --samples F --patient ID [--test K] [--config F]
//   oculab pedagogy  graph [--set F] | progress --student S | complete --student S --topic T [--component C]
//   oculab patient   add --name N [--id ID] | list
//   oculab serve     [--host H] [--port P]
//
// Common: --store DIR (else $OCULAB_STORE, else ./oculab-store) and
// --out json|csv|table. Exit codes: 0 success, 1 domain error, 2 usage.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <pthread.h>

#include "CLI11.hpp"
#include "oculab/chart.hpp"
#include "oculab/error.hpp"
#include "oculab/serialization.hpp"
#include "oculab/server.hpp"
#include "oculab/service.hpp"
#include "oculab/store.hpp"

namespace oculab {

inline constexpr const char* kDefaultStoreDir = "oculab-store";

inline std::string resolve_store_path(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("OCULAB_STORE"); env && *env) return env;
    return kDefaultStoreDir;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in '" + path + "': " + e.what());
    }
}

namespace cli_detail {

inline void print_rows(std::ostream& out, const std::string& format, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    if (format == "csv") {
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
            out << "\n";
        }
        return;
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
    auto line = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i + 1 < r.size())
                out << std::left << std::setw(static_cast<int>(width[i] + 2)) << r[i];
            else
                out << r[i];
        }
        out << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
}

inline std::vector<std::vector<std::string>> report_rows(const ExamReport& r) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"test", std::string(to_string(r.test_kind))});
    for (const auto& name : metric_names())
        if (auto v = metric_value(r, name)) rows.push_back({name, format_sig9(*v)});
    for (const auto& [name, flag] : r.flags) rows.push_back({"flag." + name, std::string(to_string(flag))});
    rows.push_back({"overall", std::string(to_string(r.overall))});
    return rows;
}

inline void print_report(std::ostream& out, const std::string& format, const ExamReport& r,
                         const std::optional<std::string>& session_id) {
    if (format == "json") {
        json j{{"session_id", session_id ? json(*session_id) : json(nullptr)}, {"report", to_json(r)}};
        out << j.dump(2) << "\n";
        return;
    }
    auto rows = report_rows(r);
    if (session_id) rows.insert(rows.begin(), {"session_id", *session_id});
    print_rows(out, format, {"metric", "value"}, rows);
}

/// Builds a run request from a config document plus command-line overrides.
inline RunRequest build_request(json doc, const std::optional<std::string>& test, const std::optional<std::string>& preset,
                                const std::optional<std::uint64_t>& seed, const std::optional<std::string>& patient,
                                const std::optional<std::string>& samples_path) {
    if (!doc.is_object()) throw ValidationError("config document must be a JSON object");
    json t = doc.value("test", json::object());
    if (test) t["test"] = *test;
    if (seed) t["seed"] = *seed;
    doc["test"] = t;
    if (samples_path) {
        doc.erase("subject");
        doc["replay"] = json{{"path", *samples_path}};
    } else if (!doc.contains("replay") || doc.at("replay").is_null()) {
        json s = doc.value("subject", json::object());
        if (preset) s["preset"] = *preset;
        if (seed) s["seed"] = *seed;
        doc["subject"] = s;
    }
    if (patient) doc["patient_id"] = *patient;
    return run_request_from_json(doc);
}

/// Follows a live session's stream, echoing events, until it ends.
inline void follow_live(Service& svc, const std::string& id, std::ostream& err) {
    std::size_t cursor = 0;
    for (;;) {
        const StreamBatch b = svc.stream(id, cursor, std::chrono::milliseconds(200));
        for (const auto& e : b.entries) {
            if (const auto* ev = std::get_if<TrialEvent>(&e.item)) {
                err << format_sig9(ev->t) << "s " << to_string(ev->kind);
                if (ev->side != Side::None) err << " " << to_string(ev->side);
                if (ev->latency_s) err << " latency=" << format_sig9(*ev->latency_s) << "s";
                err << "\n";
            }
        }
        cursor = b.next_cursor;
        if (b.status == "failed") throw Error("live session failed: " + b.error.value_or("unknown error"));
        if (b.status == "complete") return;
    }
}

inline int serve_until_signal(Service& svc, const std::string& host, int port, std::ostream& out) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);  // inherited by server threads
    HttpServer server(svc);
    const int bound = server.start(host, port);
    out << "listening on http://" << host << ":" << bound << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    svc.shutdown();
    out << "stopped" << std::endl;
    return 0;
}

}  // namespace cli_detail

/// Runs one command line (without the program name). Never throws.
inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    CLI::App app{"Oculomotor examination engine", "oculab"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string store_flag;
    std::string format = "json";
    app.add_option("--store", store_flag, "Store directory (default $OCULAB_STORE or ./oculab-store)");
    app.add_option("--out", format, "Output format")->check(CLI::IsMember({"json", "csv", "table"}));

    const std::vector<std::string> kinds{"saccade", "pursuit", "vor"};
    const std::vector<std::string> presets{"normal", "abnormal", "perfect"};

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a test with the synthetic subject");
    std::optional<std::string> sim_test, sim_preset, sim_config, sim_patient;
    std::optional<std::uint64_t> sim_seed;
    bool sim_live = false, sim_realtime = false;
    sim->add_option("--test", sim_test)->check(CLI::IsMember(kinds));
    sim->add_option("--preset", sim_preset)->check(CLI::IsMember(presets));
    sim->add_option("--config", sim_config, "JSON with test, subject and thresholds");
    sim->add_option("--seed", sim_seed, "Seed for both protocol and subject");
    sim->add_option("--patient", sim_patient, "Save the session for this patient");
    sim->add_flag("--live", sim_live, "Stream events while running (requires --patient)");
    sim->add_flag("--realtime", sim_realtime, "Pace a live run at wall-clock speed");

    // analyze
    auto* ana = app.add_subcommand("analyze", "Compute metrics for a stored session or a samples file");
    std::optional<std::string> ana_session, ana_samples, ana_test, ana_config, ana_chart;
    std::string ana_svg = "precision.svg";
    auto* ana_session_opt = ana->add_option("--session", ana_session);
    auto* ana_samples_opt = ana->add_option("--samples", ana_samples, "Samples CSV to replay");
    ana_session_opt->excludes(ana_samples_opt);
    ana->add_option("--test", ana_test)->check(CLI::IsMember(kinds));
    ana->add_option("--config", ana_config);
    ana->add_option("--chart", ana_chart, "Emit a chart CSV on stdout")->check(CLI::IsMember({"precision"}));
    ana->add_option("--svg", ana_svg, "SVG output path for --chart");

    // classify
    auto* cls = app.add_subcommand("classify", "Screen a report against thresholds");
    std::optional<std::string> cls_session, cls_report, cls_config;
    auto* cls_session_opt = cls->add_option("--session", cls_session);
    auto* cls_report_opt = cls->add_option("--report", cls_report, "ExamReport JSON file");
    cls_session_opt->excludes(cls_report_opt);
    cls->add_option("--config", cls_config, "JSON whose 'thresholds' replace the defaults");

    // trend
    auto* tr = app.add_subcommand("trend", "Metric values across a patient's sessions");
    std::string tr_patient, tr_metric;
    tr->add_option("--patient", tr_patient)->required();
    tr->add_option("--metric", tr_metric)->required();

    // import
    auto* imp = app.add_subcommand("import", "Replay an external samples CSV and save it");
    std::string imp_samples, imp_patient;
    std::optional<std::string> imp_test, imp_config;
    imp->add_option("--samples", imp_samples)->required();
    imp->add_option("--patient", imp_patient)->required();
    imp->add_option("--test", imp_test)->check(CLI::IsMember(kinds));
    imp->add_option("--config", imp_config);

    // pedagogy
    auto* ped = app.add_subcommand("pedagogy", "Learning-path graph and student progress");
    ped->require_subcommand(1);
    auto* ped_graph = ped->add_subcommand("graph", "Print (or replace with --set) the topic graph");
    std::optional<std::string> ped_set;
    ped_graph->add_option("--set", ped_set, "Graph JSON file");
    auto* ped_prog = ped->add_subcommand("progress", "Show a student's progress and frontier");
    std::string ped_student;
    ped_prog->add_option("--student", ped_student)->required();
    auto* ped_done = ped->add_subcommand("complete", "Mark a topic or component complete");
    std::string ped_topic;
    std::optional<std::string> ped_component;
    ped_done->add_option("--student", ped_student)->required();
    ped_done->add_option("--topic", ped_topic)->required();
    ped_done->add_option("--component", ped_component);

    // patient
    auto* pat = app.add_subcommand("patient", "Patient profiles");
    pat->require_subcommand(1);
    auto* pat_add = pat->add_subcommand("add", "Create a patient profile");
    std::string pat_name;
    std::optional<std::string> pat_id;
    pat_add->add_option("--name", pat_name)->required();
    pat_add->add_option("--id", pat_id);
    auto* pat_list = pat->add_subcommand("list", "List patient profiles");

    // serve
    auto* srv = app.add_subcommand("serve", "Serve the HTTP API until SIGINT or SIGTERM");
    std::string srv_host = "127.0.0.1";
    int srv_port = 8080;
    srv->add_option("--host", srv_host);
    srv->add_option("--port", srv_port)->check(CLI::Range(0, 65535));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        const std::string store_path = resolve_store_path(store_flag);

        if (*sim) {
            if (sim_live && !sim_patient) {
                err << "usage error: --live requires --patient\n";
                return 2;
            }
            RunRequest req = build_request(sim_config ? load_json_file(*sim_config) : json::object(), sim_test,
                                           sim_preset, sim_seed, sim_patient, std::nullopt);
            if (!sim_patient) {
                print_report(out, format, execute_run(req).record.report, std::nullopt);
                return 0;
            }
            req.live = sim_live;
            req.realtime = sim_realtime;
            Store store(store_path);
            Service svc(store);
            const RunTicket t = svc.start_run(req);
            if (t.live) follow_live(svc, t.session_id, err);
            print_report(out, format, store.load_session(t.session_id).report, t.session_id);
            return 0;
        }

        if (*ana) {
            SessionRecord rec;
            std::optional<std::string> sid;
            if (ana_session) {
                Store store(store_path);
                rec = store.load_session(*ana_session);
                sid = *ana_session;
            } else if (ana_samples) {
                const RunRequest req = build_request(ana_config ? load_json_file(*ana_config) : json::object(),
                                                     ana_test, std::nullopt, std::nullopt, std::nullopt, ana_samples);
                rec = execute_run(req).record;
            } else {
                err << "usage error: analyze needs --session or --samples\n";
                return 2;
            }
            if (ana_chart) {
                out << precision_csv(rec.records);
                std::ofstream svg(ana_svg);
                if (!svg) throw Error("cannot write '" + ana_svg + "'");
                svg << precision_svg(rec.records, "Precision: per-eye angular error");
                err << "wrote " << ana_svg << "\n";
                return 0;
            }
            print_report(out, format, rec.report, sid);
            return 0;
        }

        if (*cls) {
            ExamReport report;
            Thresholds th;
            if (cls_session) {
                Store store(store_path);
                const SessionRecord rec = store.load_session(*cls_session);
                report = rec.report;
                th = rec.thresholds;
            } else if (cls_report) {
                json j = load_json_file(*cls_report);
                report = exam_report_from_json(j.contains("report") ? j.at("report") : j);
            } else {
                err << "usage error: classify needs --session or --report\n";
                return 2;
            }
            if (cls_config) {
                const json doc = load_json_file(*cls_config);
                th = thresholds_from_json(doc.value("thresholds", json::object()));
            }
            if (auto bad = invalid_fields(th); !bad.empty()) throw ConfigError(bad, "invalid thresholds");
            report = classify(report, th);
            if (format == "json") {
                json flags = json::object();
                for (const auto& [k, f] : report.flags) flags[k] = to_string(f);
                out << json{{"flags", flags}, {"overall", to_string(report.overall)}}.dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& [k, f] : report.flags) rows.push_back({k, std::string(to_string(f))});
                rows.push_back({"overall", std::string(to_string(report.overall))});
                print_rows(out, format, {"metric", "flag"}, rows);
            }
            return 0;
        }

        if (*tr) {
            Store store(store_path);
            const auto pts = store.trend(tr_patient, tr_metric);
            if (format == "json") {
                out << trend_json(tr_patient, tr_metric, pts).dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& p : pts) rows.push_back({p.started_at, p.session_id, format_sig9(p.value)});
                print_rows(out, format, {"started_at", "session_id", "value"}, rows);
            }
            return 0;
        }

        if (*imp) {
            const RunRequest req = build_request(imp_config ? load_json_file(*imp_config) : json::object(), imp_test,
                                                 std::nullopt, std::nullopt, imp_patient, imp_samples);
            Store store(store_path);
            Service svc(store);
            const RunTicket t = svc.start_run(req);
            print_report(out, format, t.record->report, t.session_id);
            return 0;
        }

        if (*ped) {
            Store store(store_path);
            Service svc(store);
            if (*ped_graph) {
                if (ped_set) svc.put_graph(topic_graph_from_json(load_json_file(*ped_set)));
                out << to_json(svc.graph()).dump(2) << "\n";
            } else if (*ped_prog) {
                out << progress_view(svc.graph(), svc.progress(ped_student)).dump(2) << "\n";
            } else {
                const StudentProgress p = svc.complete(ped_student, ped_topic, ped_component);
                out << progress_view(svc.graph(), p).dump(2) << "\n";
            }
            return 0;
        }

        if (*pat) {
            Store store(store_path);
            Service svc(store);
            std::vector<PatientProfile> list;
            if (*pat_add) list.push_back(svc.create_patient(pat_name, pat_id));
            if (*pat_list) list = svc.list_patients();
            if (format == "json") {
                json arr = json::array();
                for (const auto& p : list) arr.push_back(to_json(p));
                out << (*pat_add ? arr.at(0) : arr).dump(2) << "\n";
            } else {
                std::vector<std::vector<std::string>> rows;
                for (const auto& p : list) rows.push_back({p.id, p.display_name, p.created_at});
                print_rows(out, format, {"id", "display_name", "created_at"}, rows);
            }
            return 0;
        }

        if (*srv) {
            Store store(store_path);
            Service svc(store);
            return serve_until_signal(svc, srv_host, srv_port, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace oculab
