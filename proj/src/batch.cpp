#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>

#include "seagle/cli_io.hpp"
#include "seagle/errors.hpp"
#include "seagle/parallel.hpp"

namespace seagle::io {

void RunManifest::validate() const {
    if (genotypes.empty()) throw ParameterError("manifest: genotype path is required");
    if (pheno.empty()) throw ParameterError("manifest: phenotype path is required");
    if (pheno_col.empty()) throw ParameterError("manifest: phenotype column is required");
    if (env_col.empty()) throw ParameterError("manifest: environment column is required");
    if (out.empty()) throw ParameterError("manifest: output path is required");
    if (threads < 1) throw ParameterError("manifest: threads must be at least 1");
    if (std::find(covar_cols.begin(), covar_cols.end(), env_col) != covar_cols.end() ||
        std::find(covar_cols.begin(), covar_cols.end(), pheno_col) != covar_cols.end()) {
        throw ParameterError("manifest: covariate columns must differ from the trait and environment columns");
    }
    if (!(test.davies.accuracy > 0.0) || test.davies.max_terms < 1) {
        throw ParameterError("manifest: Davies accuracy must be positive and the term cap at least 1");
    }
    em.validate();
}

int default_threads(int fallback) {
    const char* env = std::getenv("SEAGLE_THREADS");
    if (env == nullptr) return fallback;
    int v = 0;
    const char* end = env + std::strlen(env);
    const auto [ptr, ec] = std::from_chars(env, end, v);
    if (ec != std::errc() || ptr != end || v < 1) return fallback;
    return v;
}

std::vector<ResultRow> test_gene_sets(const GenotypeData& geno,
                                      const AlignedData& data,
                                      const std::vector<GeneSetDefinition>& genes,
                                      const EmConfig& em,
                                      const VcTestOptions& opts,
                                      int threads) {
    const SnpIndex index(geno.snp_ids);
    const auto n = static_cast<Index>(data.genotype_rows.size());
    std::vector<ResultRow> rows(genes.size());
    parallel_for(genes.size(), threads, [&](std::size_t k) {
        const auto& gene = genes[k];
        const auto L = static_cast<Index>(gene.snp_ids.size());
        try {
            const std::vector<Index> cols = resolve_gene(gene, index);
            MatrixXd G(n, L);
            for (Index j = 0; j < L; ++j) {
                const Index src = cols[static_cast<std::size_t>(j)];
                for (Index i = 0; i < n; ++i) {
                    G(i, j) = geno.dosages(data.genotype_rows[static_cast<std::size_t>(i)], src);
                }
            }
            const TestInput input(data.y, data.X, data.env_col, std::move(G));
            rows[k] = make_row(gene.gene_name, n, L, run_test(input, em, opts));
        } catch (const std::exception& e) {
            rows[k] = make_error_row(gene.gene_name, n, L, e.what());
        }
    });
    return rows;
}

BatchOutcome run_batch(const RunManifest& manifest) {
    manifest.validate();
    const GenotypeData geno = parse_genotypes(manifest.genotypes, manifest.format);
    const PhenotypeTable pheno = parse_phenotypes(manifest.pheno);

    std::vector<GeneSetDefinition> genes;
    if (manifest.genes.empty()) {
        genes.push_back({"all_snps", geno.snp_ids});
    } else {
        genes = parse_gene_sets(manifest.genes);
    }
    if (!manifest.gene_filter.empty()) {
        const auto it = std::find_if(genes.begin(), genes.end(),
                                     [&](const auto& g) { return g.gene_name == manifest.gene_filter; });
        if (it == genes.end()) throw ParameterError("gene '" + manifest.gene_filter + "' not found in gene-set file");
        genes = {*it};
    }
    if (genes.empty()) throw ParameterError("gene-set file defines no genes");

    const AlignedData data =
        align_samples(geno, pheno, manifest.pheno_col, manifest.env_col, manifest.covar_cols);

    BatchOutcome outcome;
    outcome.skips = data.skips;
    outcome.n_imputed = geno.n_imputed;
    outcome.rows = test_gene_sets(geno, data, genes, manifest.em, manifest.test, manifest.threads);
    outcome.n_failed = static_cast<int>(std::count_if(outcome.rows.begin(), outcome.rows.end(), [](const auto& r) {
        return r.status.rfind("error:", 0) == 0;
    }));
    write_results(manifest.out, outcome.rows);
    return outcome;
}

}  // namespace seagle::io
