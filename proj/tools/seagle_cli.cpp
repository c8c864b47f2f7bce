// Command-line front end: single-gene tests, batch runs, simulations and timing runs.

#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "seagle/cli_io.hpp"
#include "seagle/errors.hpp"
#include "seagle/simgen.hpp"
#include "seagle/vc_test.hpp"

namespace {

using namespace seagle;

struct CommonFlags {
    std::string genotypes;
    std::string format = "tsv";
    std::string pheno;
    std::string pheno_col;
    std::string env_col;
    std::vector<std::string> covar_cols;
    std::string genes;
    std::string gene;
    std::string pvalue_method = "both";
    double tol = 1e-5;
    int max_iter = 500;
    double davies_acc = 1e-9;
    int davies_terms = 100000;
    int threads = 1;
    std::uint64_t seed = 1;
    std::string out;
};

void add_test_flags(CLI::App* cmd, CommonFlags& f, bool single) {
    cmd->add_option("--genotypes", f.genotypes, "Genotype dosage file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--format", f.format, "Genotype format: tsv or plink_raw")
        ->check(CLI::IsMember({"tsv", "plink_raw"}));
    cmd->add_option("--pheno", f.pheno, "Phenotype/covariate TSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--pheno-col", f.pheno_col, "Trait column")->required();
    cmd->add_option("--env-col", f.env_col, "Environment column")->required();
    cmd->add_option("--covar-cols", f.covar_cols, "Covariate columns")->delimiter(',');
    auto* genes = cmd->add_option("--genes", f.genes, "Gene-set file (name followed by SNP ids per line)");
    if (single) {
        genes->check(CLI::ExistingFile);
        cmd->add_option("--gene", f.gene, "Gene to test from --genes")->needs(genes);
    } else {
        genes->required()->check(CLI::ExistingFile);
    }
    cmd->add_option("--pvalue-method", f.pvalue_method, "davies, liu or both")
        ->check(CLI::IsMember({"davies", "liu", "both"}));
    cmd->add_option("--tol", f.tol, "EM relative-change tolerance");
    cmd->add_option("--max-iter", f.max_iter, "EM iteration cap");
    cmd->add_option("--davies-acc", f.davies_acc, "Davies accuracy");
    cmd->add_option("--davies-terms", f.davies_terms, "Davies integration-term cap");
    cmd->add_option("--threads", f.threads, "Worker threads (default: SEAGLE_THREADS or 1)");
    cmd->add_option("--seed", f.seed, "Seed (recorded; the test itself is deterministic)");
    cmd->add_option("--out", f.out, "Results file")->required();
}

io::RunManifest to_manifest(const CommonFlags& f) {
    io::RunManifest m;
    m.genotypes = f.genotypes;
    m.format = io::parse_genotype_format(f.format);
    m.pheno = f.pheno;
    m.pheno_col = f.pheno_col;
    m.env_col = f.env_col;
    m.covar_cols = f.covar_cols;
    m.genes = f.genes;
    m.gene_filter = f.gene;
    m.em.rel_tol = f.tol;
    m.em.max_iter = f.max_iter;
    m.test.method = io::parse_pvalue_method(f.pvalue_method);
    m.test.davies.accuracy = f.davies_acc;
    m.test.davies.max_terms = f.davies_terms;
    m.threads = f.threads;
    m.out = f.out;
    m.seed = f.seed;
    return m;
}

int run_manifest(const io::RunManifest& m, bool single) {
    const io::BatchOutcome res = io::run_batch(m);
    if (single && res.rows.size() != 1) {
        throw ParameterError("test: --genes defines several genes; choose one with --gene");
    }
    const auto& s = res.skips;
    std::cerr << "samples used " << s.used << "; skipped: genotype-only " << s.genotype_only << ", phenotype-only "
              << s.phenotype_only << ", missing values " << s.missing_phenotype << '\n';
    if (res.n_imputed > 0) {
        std::cerr << "warning: " << res.n_imputed << " missing dosages mean-imputed\n";
    }
    for (const auto& r : res.rows) {
        if (r.status != "ok") std::cerr << "warning: gene " << r.gene << ": " << r.status << '\n';
    }
    std::cerr << res.rows.size() << " gene(s) written to " << m.out.string() << " (" << res.n_failed
              << " failed)\n";
    return 0;
}

double peak_rss_mb() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<double>(ru.ru_maxrss) / 1024.0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scalable exact variance-component test for gene-environment interaction"};
    app.require_subcommand(1);

    CommonFlags test_flags;
    test_flags.threads = io::default_threads();
    auto* test_cmd = app.add_subcommand("test", "Test one SNP set");
    add_test_flags(test_cmd, test_flags, true);

    CommonFlags batch_flags;
    batch_flags.threads = io::default_threads();
    auto* batch_cmd = app.add_subcommand("batch", "Test every gene in a gene-set file");
    add_test_flags(batch_cmd, batch_flags, false);

    sim::SimConfig sim_cfg;
    sim_cfg.threads = io::default_threads();
    std::string sim_mode = "random";
    std::string sim_out, sim_summary, sim_timings;
    std::string sim_pvalue = "both";
    auto* sim_cmd = app.add_subcommand("sim", "Run a simulation experiment");
    sim_cmd->add_option("--mode", sim_mode, "random or fixed")->check(CLI::IsMember({"random", "fixed"}));
    sim_cmd->add_option("--n", sim_cfg.n, "Samples per replicate");
    sim_cmd->add_option("--L", sim_cfg.L, "Loci per SNP set");
    sim_cmd->add_option("--tau", sim_cfg.tau, "G main-effect variance (random mode)");
    sim_cmd->add_option("--sigma", sim_cfg.sigma, "Residual variance");
    sim_cmd->add_option("--nu", sim_cfg.nu, "GxE variance (random mode)");
    sim_cmd->add_option("--gamma-g", sim_cfg.gamma_G, "G main effect of causal loci (fixed mode)");
    sim_cmd->add_option("--gamma-ge", sim_cfg.gamma_GE, "GxE effect of causal loci (fixed mode)");
    sim_cmd->add_option("--ell", sim_cfg.ell, "Number of causal loci (fixed mode)");
    sim_cmd->add_option("--maf-low", sim_cfg.maf_low, "Lower MAF bound");
    sim_cmd->add_option("--maf-high", sim_cfg.maf_high, "Upper MAF bound");
    sim_cmd->add_option("--replicates", sim_cfg.replicates, "Number of replicates");
    sim_cmd->add_option("--alpha", sim_cfg.alpha_levels, "Nominal levels")->delimiter(',');
    sim_cmd->add_option("--seed", sim_cfg.seed, "Master seed");
    sim_cmd->add_option("--threads", sim_cfg.threads, "Worker threads");
    sim_cmd->add_option("--tol", sim_cfg.em.rel_tol, "EM relative-change tolerance");
    sim_cmd->add_option("--max-iter", sim_cfg.em.max_iter, "EM iteration cap");
    sim_cmd->add_option("--pvalue-method", sim_pvalue, "davies, liu or both")
        ->check(CLI::IsMember({"davies", "liu", "both"}));
    sim_cmd->add_flag("--oracle", sim_cfg.oracle_compare, "Compare T against the dense oracle (n <= 2000)");
    sim_cmd->add_option("--out", sim_out, "Per-replicate table")->required();
    sim_cmd->add_option("--summary", sim_summary, "Summary table (default: <out>.summary.tsv)");
    sim_cmd->add_option("--timings", sim_timings, "Per-replicate wall times");

    std::vector<Index> bench_n{25000, 50000, 100000};
    Index bench_L = 100;
    int bench_reps = 1;
    std::uint64_t bench_seed = 1;
    std::string bench_out;
    auto* bench_cmd = app.add_subcommand("bench", "Time run_test over a range of sample sizes");
    bench_cmd->add_option("--n", bench_n, "Sample sizes")->delimiter(',');
    bench_cmd->add_option("--L", bench_L, "Loci");
    bench_cmd->add_option("--reps", bench_reps, "Repetitions per size");
    bench_cmd->add_option("--seed", bench_seed, "Seed");
    bench_cmd->add_option("--out", bench_out, "Timing table (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (test_cmd->parsed()) return run_manifest(to_manifest(test_flags), true);
        if (batch_cmd->parsed()) return run_manifest(to_manifest(batch_flags), false);

        if (sim_cmd->parsed()) {
            sim_cfg.mode = sim::parse_sim_mode(sim_mode);
            sim_cfg.test.method = io::parse_pvalue_method(sim_pvalue);
            const sim::ExperimentReport report = sim::run_experiment(sim_cfg);
            {
                std::ofstream out(sim_out, std::ios::binary | std::ios::trunc);
                if (!out) throw IoError("cannot open '" + sim_out + "' for writing");
                io::write_replicates(out, report);
            }
            const std::string summary_path = sim_summary.empty() ? sim_out + ".summary.tsv" : sim_summary;
            {
                std::ofstream out(summary_path, std::ios::binary | std::ios::trunc);
                if (!out) throw IoError("cannot open '" + summary_path + "' for writing");
                io::write_summary(out, report);
            }
            if (!sim_timings.empty()) {
                std::ofstream out(sim_timings, std::ios::binary | std::ios::trunc);
                if (!out) throw IoError("cannot open '" + sim_timings + "' for writing");
                io::write_timings(out, report);
            }
            io::write_summary(std::cout, report);
            return 0;
        }

        if (bench_cmd->parsed()) {
            std::ofstream file;
            if (!bench_out.empty()) {
                file.open(bench_out, std::ios::trunc);
                if (!file) throw IoError("cannot open '" + bench_out + "' for writing");
            }
            std::ostream& out = bench_out.empty() ? std::cout : file;
            out << "n\tL\trep\tseconds\tem_iters\tT\tp\tpeak_rss_mb\n";
            for (Index n : bench_n) {
                sim::SimConfig cfg;
                cfg.n = n;
                cfg.L = bench_L;
                cfg.seed = bench_seed;
                for (int r = 0; r < bench_reps; ++r) {
                    const TestInput input = sim::make_replicate(cfg, r);
                    const auto start = std::chrono::steady_clock::now();
                    const VcTestResult res = run_test(input, cfg.em, cfg.test);
                    const double secs =
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    out << n << '\t' << bench_L << '\t' << r << '\t' << io::format_float(secs) << '\t' << res.n_iter
                        << '\t' << io::format_float(res.statistic_T) << '\t' << io::format_float(res.p_value) << '\t'
                        << io::format_float(peak_rss_mb()) << '\n';
                    out.flush();
                }
            }
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
