// rla: sample sizing, simulations, offline audits, transcript replay and the
// audit service.
//
// Exit codes: 0 success, 1 failed check or violation, 2 usage or input error.

#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "rla/csv_io.hpp"
#include "rla/errors.hpp"
#include "rla/km_test.hpp"
#include "rla/service.hpp"
#include "rla/session.hpp"
#include "rla/sim_config.hpp"
#include "rla/simulation.hpp"

namespace fs = std::filesystem;
using namespace rla;

namespace {

constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ------------------------------------------------------------- sample-size

struct SampleSizeArgs {
    double alpha = 0.05;
    double margin = 0.05;
    double gamma = 1.1;
    double lambda = 0.0;
};

int run_sample_size(const SampleSizeArgs& a) {
    std::cout << sample_size(a.alpha, a.margin, a.gamma, a.lambda) << "\n";
    return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string experiment;
    std::string config;
    std::optional<std::int64_t> trials;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool json = false;
    bool csv = false;
    bool digests = false;
};

void print_row(const std::string& name, const std::string& value) {
    std::cout << std::left << std::setw(20) << name << value << "\n";
}

std::string fixed(double v, int digits = 6) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

int simulate_risk(const SimulationConfig& c, const SimulateArgs& a) {
    if (c.audit.mode == AuditMode::Group) throw ConfigError("simulate risk drives the ballot-comparison auditor only");
    RiskOptions options;
    options.threads = a.threads;
    options.transcript_digests = a.digests;
    const ElectionSpec election = c.election;
    const ExperimentReport r = estimate_risk([election](std::mt19937_64& rng) { return election.generate(rng); },
                                             make_adversary_factory(c.adversary), c.audit, c.trials, c.seed, options);
    if (a.json) {
        std::cout << Json{{"config", simulation_config_to_json(c)}, {"report", report_to_json(r)}}.dump(2) << "\n";
    } else if (a.csv) {
        std::cout << "adversary,trials,consistent,estimate,wilson_lower,wilson_upper,alpha,violation,mean_iterations\n"
                  << to_string(c.adversary.kind) << "," << r.trials << "," << r.consistent << "," << fixed(r.estimate)
                  << "," << fixed(r.interval.lower) << "," << fixed(r.interval.upper) << "," << r.alpha << ","
                  << (r.violation ? 1 : 0) << "," << fixed(r.mean_iterations, 3) << "\n";
    } else {
        print_row("adversary", std::string(to_string(c.adversary.kind)));
        print_row("trials", std::to_string(r.trials));
        print_row("consistent", std::to_string(r.consistent));
        print_row("estimate", fixed(r.estimate));
        print_row("wilson 95%", "[" + fixed(r.interval.lower) + ", " + fixed(r.interval.upper) + "]");
        print_row("alpha", fixed(r.alpha, 4));
        print_row("mean iterations", fixed(r.mean_iterations, 3));
        print_row("violation", r.violation ? "yes" : "no");
    }
    return r.violation ? kExitViolation : 0;
}

int simulate_completeness(const SimulationConfig& c, const SimulateArgs& a) {
    std::mt19937_64 rng(derive_seed(c.seed, 0));
    const Election election = c.election.generate(rng);
    DistributionOptions options;
    options.placement = c.adversary.placement;
    const std::int64_t draws = a.trials.value_or(c.draws);
    const DiscrepancyReport r = discrepancy_distribution(election.family, c.stage1, c.stage2, draws, c.seed, options);
    if (a.json) {
        Json cfg = simulation_config_to_json(c);
        cfg["draws"] = draws;
        std::cout << Json{{"config", cfg}, {"report", report_to_json(r)}}.dump(2) << "\n";
    } else {
        if (a.csv) {
            std::cout << "discrepancy,count,pmf,exact_pmf,lower,upper,within\n";
        } else {
            std::cout << "draws " << r.draws << ", bounds " << r.bounds.source << "\n"
                      << std::setw(6) << "D" << std::setw(10) << "count" << std::setw(12) << "pmf" << std::setw(12)
                      << "exact" << std::setw(12) << "lower" << std::setw(12) << "upper" << "  within\n";
        }
        for (std::size_t i = 0; i < 5; ++i) {
            const int v = static_cast<int>(i) - 2;
            if (a.csv) {
                std::cout << v << "," << r.counts[i] << "," << fixed(r.pmf[i]) << "," << fixed(r.exact_pmf[i]) << ","
                          << fixed(r.bounds.lower[i]) << "," << fixed(r.bounds.upper[i]) << ","
                          << (r.within[i] ? 1 : 0) << "\n";
            } else {
                std::cout << std::setw(6) << v << std::setw(10) << r.counts[i] << std::setw(12) << fixed(r.pmf[i])
                          << std::setw(12) << fixed(r.exact_pmf[i]) << std::setw(12) << fixed(r.bounds.lower[i])
                          << std::setw(12) << fixed(r.bounds.upper[i]) << "  " << (r.within[i] ? "yes" : "NO") << "\n";
            }
        }
    }
    return r.all_within ? 0 : kExitViolation;
}

int simulate_cvr_fraction_cmd(const SimulationConfig& c, const SimulateArgs& a) {
    std::mt19937_64 rng(derive_seed(c.seed, 0));
    const Manifest manifest = c.manifest.generate(rng);
    const CvrFractionReport r = simulate_cvr_fraction(manifest, c.sample_size, c.trials, c.seed);
    if (a.json) {
        std::cout << Json{{"config", simulation_config_to_json(c)}, {"report", report_to_json(r)}}.dump(2) << "\n";
    } else if (a.csv) {
        std::cout << "batches,sample_size,trials,mean_distinct,sd_distinct,oracle_distinct,mean_fraction,"
                     "oracle_fraction,mean_batch_fraction\n"
                  << r.batches << "," << r.sample_size << "," << r.trials << "," << fixed(r.mean_distinct, 3) << ","
                  << fixed(r.sd_distinct, 3) << "," << fixed(r.oracle_distinct, 3) << "," << fixed(r.mean_fraction)
                  << "," << fixed(r.oracle_fraction) << "," << fixed(r.mean_batch_fraction) << "\n";
    } else {
        print_row("batches", std::to_string(r.batches));
        print_row("sample size", std::to_string(r.sample_size));
        print_row("trials", std::to_string(r.trials));
        print_row("mean distinct", fixed(r.mean_distinct, 3) + " (sd " + fixed(r.sd_distinct, 3) + ")");
        print_row("oracle distinct", fixed(r.oracle_distinct, 3));
        print_row("fraction", fixed(r.mean_fraction));
        print_row("oracle fraction", fixed(r.oracle_fraction));
        print_row("batch fraction", fixed(r.mean_batch_fraction));
    }
    return 0;
}

int run_simulate(const SimulateArgs& a) {
    Json j = Json::object();
    if (!a.config.empty()) {
        j = Json::parse(read_file(a.config), nullptr, false);
        if (j.is_discarded()) throw UsageError("config '" + a.config + "' is not valid JSON");
    }
    SimulationConfig c = simulation_config_from_json(j);
    if (a.trials && a.experiment != "completeness") c.trials = *a.trials;
    if (a.seed) c.seed = *a.seed;
    if (a.experiment == "risk") return simulate_risk(c, a);
    if (a.experiment == "completeness") return simulate_completeness(c, a);
    return simulate_cvr_fraction_cmd(c, a);
}

// ------------------------------------------------------------------- audit

struct AuditArgs {
    std::string manifest;
    std::string tabulation;
    std::string mode = "ballot";
    std::string transform;
    std::optional<std::uint64_t> seed;
    double alpha = 0.05;
    double gamma = 1.1;
    std::int64_t ell_min = 1;
    std::int64_t ell_max = 10000;
    std::optional<std::int64_t> rounds;
    std::string cvr_dir;
    std::string ballots;
    std::string session_dir;
    std::string resume;
    bool quiet = false;
};

/// Answers requests from files where given, from the prompt otherwise.
class AuditDriver {
public:
    AuditDriver(const AuditArgs& args, std::istream& in, std::ostream& out) : args_(args), in_(in), out_(out) {
        if (!args.ballots.empty()) ballots_.emplace(parse_ballots(read_file(args.ballots)));
    }

    std::optional<std::string> cvr_for(int batch) {
        if (!args_.cvr_dir.empty()) {
            const fs::path p = fs::path(args_.cvr_dir) / (std::to_string(batch) + ".csv");
            if (fs::exists(p)) return read_file(p.string());
        }
        return prompt("CVR file for batch " + std::to_string(batch) + ": ", [](const std::string& line) {
            return read_file(line);
        });
    }

    std::optional<Interpretation> ballot(const PendingRequest& req) {
        if (ballots_) {
            for (const auto& b : ballots_->batch(req.batch)) {
                if (b.identifier == req.identifier) return Interpretation(std::pair{b.votes_w, b.votes_l});
            }
            return Interpretation(std::nullopt);
        }
        return prompt("Ballot '" + req.identifier + "' (row " + std::to_string(req.row) + ") of batch " +
                          std::to_string(req.batch) + " [w]inner/[l]oser/[b]lank/[o]vervote/[m]issing: ",
                      [](const std::string& line) -> Interpretation {
                          if (line == "w" || line == "winner") return std::pair{1, 0};
                          if (line == "l" || line == "loser") return std::pair{0, 1};
                          if (line == "b" || line == "blank") return std::pair{0, 0};
                          if (line == "o" || line == "overvote") return std::pair{1, 1};
                          if (line == "m" || line == "missing") return std::nullopt;
                          throw UsageError("expected w, l, b, o or m");
                      });
    }

    /// Contiguous groups when a ballots file is given: group g holds the
    /// ballots after those of groups 1..g-1 as declared in the CVR.
    std::optional<GroupCount> group(const PendingRequest& req, const std::string& cvr_csv) {
        if (ballots_) {
            const GroupCvrTable table = parse_group_cvr(cvr_csv, req.batch);
            std::size_t start = 0;
            for (std::int64_t g = 1; g < req.group; ++g) start += static_cast<std::size_t>(table.groups[g - 1].s);
            const auto batch = ballots_->batch(req.batch);
            GroupCount c;
            for (std::size_t p = start; p < batch.size() && p < start + static_cast<std::size_t>(req.declared_size); ++p) {
                c.size += 1;
                c.w += batch[p].votes_w;
                c.l += batch[p].votes_l;
            }
            return c;
        }
        return prompt("Group " + std::to_string(req.group) + " of batch " + std::to_string(req.batch) +
                          " (declared size " + std::to_string(req.declared_size) + "), enter 'size w l': ",
                      [](const std::string& line) {
                          std::istringstream ss(line);
                          GroupCount c;
                          if (!(ss >> c.size >> c.w >> c.l)) throw UsageError("expected three integers");
                          return c;
                      });
    }

    std::ostream& out() { return out_; }

private:
    template <typename Parse>
    auto prompt(const std::string& question, Parse parse) -> std::optional<decltype(parse(std::string()))> {
        for (;;) {
            out_ << question << std::flush;
            std::string line;
            if (!std::getline(in_, line)) return std::nullopt;
            while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
            try {
                return parse(line);
            } catch (const UsageError& e) {
                out_ << "  " << e.what() << "\n";
            }
        }
    }

    const AuditArgs& args_;
    std::istream& in_;
    std::ostream& out_;
    std::optional<BallotFamily> ballots_;
};

void report_iteration(std::ostream& out, const IterationRecord& r) {
    out << "iteration " << r.iter << ": batch " << r.batch << " row " << r.row << " discrepancy " << r.discrepancy
        << " risk " << std::setprecision(6) << std::exp(r.log_risk) << "\n";
}

int run_audit_cmd(const AuditArgs& a) {
    std::shared_ptr<KvStore> store;
    if (!a.session_dir.empty()) {
        fs::create_directories(a.session_dir);
        store = std::make_shared<DirectoryStore>(a.session_dir);
    }

    std::optional<AuditSession> session;
    if (!a.resume.empty()) {
        if (!store) throw UsageError("--resume needs --session-dir");
        session.emplace(open_session(*store, a.resume));
    } else {
        if (a.manifest.empty() || a.tabulation.empty()) throw UsageError("--manifest and --tabulation are required");
        AuditConfig config;
        config.alpha = a.alpha;
        config.gamma = a.gamma;
        config.ell_min = a.ell_min;
        config.ell_max = a.ell_max;
        config.rounds = a.rounds;
        config.mode = audit_mode_from_string(a.mode);
        if (!a.transform.empty()) config.transform = transform_from_string(a.transform);
        else if (config.mode == AuditMode::BallotNoOvervote) config.transform = TransformKind::ForceNoOvervote;
        else if (config.mode == AuditMode::Group) config.transform = TransformKind::Identity;
        if (a.seed) {
            config.rng_seed = *a.seed;
        } else {
            std::random_device rd;
            config.rng_seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
        }
        config.validate();
        std::ostringstream id;
        id << "audit-" << std::hex << config.rng_seed;
        session.emplace(id.str(), parse_manifest(read_file(a.manifest)), parse_tabulation(read_file(a.tabulation)),
                        config);
    }

    AuditSession& s = *session;
    AuditDriver driver(a, std::cin, std::cout);
    std::ostream& out = driver.out();
    const auto& rec = s.record();
    out << "session " << rec.id << " seed " << rec.config.rng_seed << " mu " << rec.mu << "\n";
    for (const auto& w : s.warnings()) out << "warning: " << w << "\n";
    auto save = [&] {
        if (store) s.save(*store);
    };
    save();

    std::size_t reported = rec.iterations.size();
    while (s.status() != AuditStatus::Stopped) {
        if (s.status() == AuditStatus::AwaitingBatch) {
            const int batch = s.draw();
            if (!a.quiet) out << "drew batch " << batch << "\n";
        } else if (s.status() == AuditStatus::AwaitingCvr) {
            const int batch = rec.current_batch;
            auto csv = driver.cvr_for(batch);
            if (!csv) break;
            try {
                s.submit_cvr_csv(*csv);
            } catch (const ParseError& e) {
                out << "CVR rejected: " << e.what() << "\n";
                if (!a.cvr_dir.empty()) throw;
                continue;
            }
        } else {
            const auto req = s.pending();
            if (rec.config.mode == AuditMode::Group) {
                auto count = driver.group(*req, s.cvr_files().at(req->batch));
                if (!count) break;
                s.submit_group_count(*count);
            } else {
                auto interp = driver.ballot(*req);
                if (!interp) break;
                s.submit_interpretation(*interp);
            }
        }
        save();
        for (; reported < rec.iterations.size(); ++reported) {
            if (!a.quiet) report_iteration(out, rec.iterations[reported]);
        }
    }
    save();
    if (s.status() != AuditStatus::Stopped) {
        out << "audit interrupted after " << rec.iterations.size() << " iterations";
        if (store) out << "; resume with --session-dir " << a.session_dir << " --resume " << rec.id;
        out << "\n";
        return kExitViolation;
    }
    const Verdict v = *s.verdict();
    out << "verdict " << to_string(v) << " after " << rec.iterations.size() << " iterations, risk "
        << std::setprecision(6) << std::exp(s.log_risk()) << "\n";
    return v == Verdict::Consistent ? 0 : kExitViolation;
}

// ------------------------------------------------------------------ replay

int run_replay(const std::string& transcript_path, std::string header_path) {
    if (header_path.empty()) header_path = (fs::path(transcript_path).parent_path() / "session.json").string();
    const SessionHeader header = parse_session_header(read_file(header_path));
    const ReplayReport r = replay_transcript(header.record, read_file(transcript_path));
    if (!r.ok) {
        std::cout << transcript_path << ":" << r.first_bad_line << ": " << r.message << "\n";
        return kExitViolation;
    }
    if (static_cast<std::size_t>(r.lines) != header.iterations) {
        std::cout << transcript_path << ": " << r.lines << " lines but session.json records " << header.iterations
                  << "\n";
        return kExitViolation;
    }
    std::cout << "ok: " << r.lines << " iterations replayed\n";
    return 0;
}

// ------------------------------------------------------------------- serve

HttpServer* g_server = nullptr;

int run_serve(const std::string& host, int port, const std::string& static_dir, const std::string& store_dir) {
    std::shared_ptr<KvStore> store;
    if (store_dir.empty()) {
        store = std::make_shared<MemoryStore>();
    } else {
        fs::create_directories(store_dir);
        store = std::make_shared<DirectoryStore>(store_dir);
    }
    AuditService service(store);
    HttpServer server(service, static_dir);
    g_server = &server;
    std::signal(SIGINT, [](int) { g_server->stop(); });
    std::signal(SIGTERM, [](int) { g_server->stop(); });
    std::cerr << "listening on " << host << ":" << port << std::endl;
    server.run(host, port);
    g_server = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive risk-limiting ballot-comparison audits"};
    app.require_subcommand(1);

    SampleSizeArgs ss;
    auto* sample = app.add_subcommand("sample-size", "Ballots to draw for a given margin");
    sample->add_option("--alpha", ss.alpha, "Risk limit")->default_val(0.05);
    sample->add_option("--margin", ss.margin, "Diluted margin")->required();
    sample->add_option("--gamma", ss.gamma, "Error inflation")->default_val(1.1);
    sample->add_option("--lambda", ss.lambda, "Tolerated 1-vote overstatements per unit margin")->default_val(0.0);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo experiments");
    simulate->add_option("experiment", sim.experiment, "risk, completeness or cvr-fraction")
        ->required()
        ->check(CLI::IsMember({"risk", "completeness", "cvr-fraction"}));
    simulate->add_option("--config", sim.config, "Simulation config JSON file");
    simulate->add_option("--trials", sim.trials, "Trials (draws for completeness)");
    simulate->add_option("--seed", sim.seed, "Master seed");
    simulate->add_option("--threads", sim.threads, "Worker threads")->default_val(1u);
    auto* json_flag = simulate->add_flag("--json", sim.json, "Emit JSON");
    simulate->add_flag("--csv", sim.csv, "Emit CSV")->excludes(json_flag);
    simulate->add_flag("--digests", sim.digests, "Include per-trial transcript digests (risk)");

    AuditArgs au;
    auto* audit = app.add_subcommand("audit", "Run an audit interactively");
    audit->add_option("--manifest", au.manifest, "Manifest CSV");
    audit->add_option("--tabulation", au.tabulation, "Tabulation CSV");
    audit->add_option("--mode", au.mode, "ballot, ballot_no_overvote or group")
        ->check(CLI::IsMember({"ballot", "ballot_no_overvote", "group"}));
    audit->add_option("--transform", au.transform, "identity, force or force_no_overvote");
    audit->add_option("--seed", au.seed, "Audit seed (random if absent)");
    audit->add_option("--alpha", au.alpha, "Risk limit");
    audit->add_option("--gamma", au.gamma, "Error inflation");
    audit->add_option("--ell-min", au.ell_min, "Minimum iterations");
    audit->add_option("--ell-max", au.ell_max, "Maximum iterations");
    audit->add_option("--rounds", au.rounds, "Batches drawn per round");
    audit->add_option("--cvr-dir", au.cvr_dir, "Directory holding <batch>.csv CVR files");
    audit->add_option("--ballots", au.ballots, "Ballots CSV used to answer ballot and group requests");
    audit->add_option("--session-dir", au.session_dir, "Persist the session under this directory");
    audit->add_option("--resume", au.resume, "Resume a persisted session by id");
    audit->add_flag("--quiet", au.quiet, "Only print the verdict");

    std::string transcript_path, header_path;
    auto* replay = app.add_subcommand("replay", "Re-verify a transcript");
    replay->add_option("--transcript", transcript_path, "transcript.jsonl")->required();
    replay->add_option("--session", header_path, "session.json (default: next to the transcript)");

    std::string host = "127.0.0.1", static_dir, store_dir;
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "HTTP/JSON audit service");
    serve->add_option("--port", port, "Port")->default_val(8080);
    serve->add_option("--host", host, "Bind address")->default_val("127.0.0.1");
    serve->add_option("--static", static_dir, "Directory served at /");
    serve->add_option("--store", store_dir, "Session directory (in-memory if absent)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*sample) return run_sample_size(ss);
        if (*simulate) return run_simulate(sim);
        if (*audit) return run_audit_cmd(au);
        if (*replay) return run_replay(transcript_path, header_path);
        if (*serve) return run_serve(host, port, static_dir, store_dir);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return kExitViolation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
