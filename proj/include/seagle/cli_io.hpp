#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "seagle/reml_em.hpp"
#include "seagle/simgen.hpp"
#include "seagle/vc_test.hpp"

namespace seagle::io {

enum class GenotypeFormat { tsv, plink_raw };

GenotypeFormat parse_genotype_format(const std::string& text);
PValueMethod parse_pvalue_method(const std::string& text);

struct GenotypeData {
    MatrixXd dosages;  // samples x SNPs
    std::vector<std::string> snp_ids;
    std::vector<std::string> sample_ids;
    int n_imputed = 0;  // NA entries replaced by their column mean
};

/// tsv: header "<id> snp1 snp2 ..." then one tab-separated row per sample.
/// plink_raw: whitespace-separated FID IID PAT MAT SEX PHENOTYPE then dosages; IID is the sample id.
GenotypeData parse_genotypes(std::istream& in, GenotypeFormat format, const std::string& source = "<stream>");
GenotypeData parse_genotypes(const std::filesystem::path& path, GenotypeFormat format);

/// Column index of a SNP id; plink_raw names such as "rs1_A" also resolve from "rs1".
class SnpIndex {
public:
    explicit SnpIndex(const std::vector<std::string>& snp_ids);
    /// -1 when the id is unknown or ambiguous.
    Index find(const std::string& id) const;

private:
    std::unordered_map<std::string, Index> exact_;
    std::unordered_map<std::string, Index> stem_;
};

struct PhenotypeTable {
    std::vector<std::string> columns;  // excludes the leading sample-id column
    std::vector<std::string> sample_ids;
    MatrixXd values;  // samples x columns; NA parsed as NaN

    Index column(const std::string& name) const;  // throws ParameterError if absent
};

PhenotypeTable parse_phenotypes(std::istream& in, const std::string& source = "<stream>");
PhenotypeTable parse_phenotypes(const std::filesystem::path& path);

struct GeneSetDefinition {
    std::string gene_name;
    std::vector<std::string> snp_ids;
};

/// One gene per line: name followed by SNP ids, whitespace separated. '#' starts a comment.
std::vector<GeneSetDefinition> parse_gene_sets(std::istream& in, const std::string& source = "<stream>");
std::vector<GeneSetDefinition> parse_gene_sets(const std::filesystem::path& path);

/// Column indices of a gene's SNPs; throws ParseError naming the first unresolved id.
std::vector<Index> resolve_gene(const GeneSetDefinition& gene, const SnpIndex& index);

struct SkipReport {
    int genotype_only = 0;       // sample in the genotype file only
    int phenotype_only = 0;      // sample in the phenotype file only
    int missing_phenotype = 0;   // matched, but trait/env/covariate NA
    int used = 0;

    int genotype_total() const { return used + genotype_only + missing_phenotype; }
    int phenotype_total() const { return used + phenotype_only + missing_phenotype; }
};

struct AlignedData {
    VectorXd y;
    MatrixXd X;  // [1 | covariates | E]
    Index env_col = 0;
    std::vector<Index> genotype_rows;  // genotype row of each analysed sample
    std::vector<std::string> sample_ids;
    SkipReport skips;
};

/// Inner join on sample id, in genotype-file order; rows with NA in any used column are skipped.
AlignedData align_samples(const GenotypeData& geno,
                          const PhenotypeTable& pheno,
                          const std::string& pheno_col,
                          const std::string& env_col,
                          const std::vector<std::string>& covar_cols);

// -------------------------------------------------------------------------
// Results
// -------------------------------------------------------------------------

struct ResultRow {
    std::string gene;
    Index n = 0;
    Index L = 0;
    double T = 0.0;
    double p_davies = 0.0;
    double p_liu = 0.0;
    double tau_hat = 0.0;
    double sigma_hat = 0.0;
    int em_iters = 0;
    bool converged = false;
    std::string status;  // ok | degenerate | em_not_converged | davies_<reason> | error:<reason>

    bool operator==(const ResultRow&) const = default;
};

inline constexpr const char* kResultHeader =
    "gene\tn\tL\tT\tp_davies\tp_liu\ttau_hat\tsigma_hat\tem_iters\tconverged\tstatus";

/// Scientific notation with 6 significant digits; NaN is written as NA.
std::string format_float(double x);

ResultRow make_row(const std::string& gene, Index n, Index L, const VcTestResult& result);
ResultRow make_error_row(const std::string& gene, Index n, Index L, const std::string& reason);

void write_results(std::ostream& out, const std::vector<ResultRow>& rows);
void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results(std::istream& in, const std::string& source = "<stream>");
std::vector<ResultRow> read_results(const std::filesystem::path& path);

// -------------------------------------------------------------------------
// Batch runs
// -------------------------------------------------------------------------

struct RunManifest {
    std::filesystem::path genotypes;
    GenotypeFormat format = GenotypeFormat::tsv;
    std::filesystem::path pheno;
    std::string pheno_col;
    std::string env_col;
    std::vector<std::string> covar_cols;
    std::filesystem::path genes;  // empty: all SNPs form one set
    std::string gene_filter;      // non-empty: only this gene
    EmConfig em;
    VcTestOptions test;
    std::filesystem::path out;
    int threads = 1;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Worker count from SEAGLE_THREADS when set and valid, otherwise `fallback`.
int default_threads(int fallback = 1);

struct BatchOutcome {
    std::vector<ResultRow> rows;
    SkipReport skips;
    int n_imputed = 0;
    int n_failed = 0;
};

/// Tests every gene set against already-aligned data; rows come back in input gene order.
std::vector<ResultRow> test_gene_sets(const GenotypeData& geno,
                                      const AlignedData& data,
                                      const std::vector<GeneSetDefinition>& genes,
                                      const EmConfig& em,
                                      const VcTestOptions& opts,
                                      int threads);

/// Parses the manifest inputs, runs every gene and writes the results file.
BatchOutcome run_batch(const RunManifest& manifest);

// -------------------------------------------------------------------------
// Simulation output
// -------------------------------------------------------------------------

/// Per-replicate table (deterministic; no timings).
void write_replicates(std::ostream& out, const sim::ExperimentReport& report);
/// Rejection rates and estimator summary as a two-column key/value table.
void write_summary(std::ostream& out, const sim::ExperimentReport& report);
/// Per-replicate wall times.
void write_timings(std::ostream& out, const sim::ExperimentReport& report);

}  // namespace seagle::io
