#include "seagle/cli_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "seagle/errors.hpp"

namespace seagle::io {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim_cr(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find('\t', start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream ss{std::string(line)};
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool is_missing(const std::string& tok) { return tok == "NA" || tok == "na" || tok == "."; }

std::string where(const std::string& source, long line) {
    return source + ":" + std::to_string(line);
}

double parse_number(const std::string& tok, const std::string& source, long line, bool allow_na) {
    if (allow_na && is_missing(tok)) return kNaN;
    double v = 0.0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (tok.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError(where(source, line) + ": non-numeric value '" + tok + "'", line);
    }
    return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

void check_written(std::ostream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string sanitize(std::string s) {
    for (char& c : s) {
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

}  // namespace

GenotypeFormat parse_genotype_format(const std::string& text) {
    if (text == "tsv") return GenotypeFormat::tsv;
    if (text == "plink_raw" || text == "raw") return GenotypeFormat::plink_raw;
    throw ParameterError("unknown genotype format '" + text + "' (expected tsv or plink_raw)");
}

PValueMethod parse_pvalue_method(const std::string& text) {
    if (text == "davies") return PValueMethod::davies;
    if (text == "liu") return PValueMethod::liu;
    if (text == "both") return PValueMethod::both;
    throw ParameterError("unknown p-value method '" + text + "' (expected davies, liu or both)");
}

// -------------------------------------------------------------------------
// Genotypes
// -------------------------------------------------------------------------

GenotypeData parse_genotypes(std::istream& in, GenotypeFormat format, const std::string& source) {
    const bool raw = format == GenotypeFormat::plink_raw;
    const std::size_t lead = raw ? 6 : 1;
    auto split = [raw](std::string_view s) { return raw ? split_ws(s) : split_tabs(s); };

    std::string line;
    long line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim_cr(line).empty()) {
            header = split(trim_cr(line));
            break;
        }
    }
    if (header.size() <= lead) {
        throw ParseError(where(source, line_no) + ": genotype header has no SNP columns", line_no);
    }

    GenotypeData data;
    data.snp_ids.assign(header.begin() + static_cast<long>(lead), header.end());
    const std::size_t width = header.size();
    std::vector<double> values;
    std::unordered_set<std::string> seen_samples;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = trim_cr(line);
        if (body.empty()) continue;
        const auto tok = split(body);
        if (tok.size() != width) {
            std::ostringstream msg;
            msg << where(source, line_no) << ": expected " << width << " fields, found " << tok.size();
            throw ParseError(msg.str(), line_no);
        }
        const std::string& id = raw ? tok[1] : tok[0];
        if (!seen_samples.insert(id).second) {
            throw ParseError(where(source, line_no) + ": duplicate sample id '" + id + "'", line_no);
        }
        data.sample_ids.push_back(id);
        for (std::size_t k = lead; k < width; ++k) {
            values.push_back(parse_number(tok[k], source, line_no, true));
        }
    }
    const auto n = static_cast<Index>(data.sample_ids.size());
    const auto m = static_cast<Index>(data.snp_ids.size());
    if (n == 0) throw ParseError(source + ": genotype file has no sample rows", line_no);

    data.dosages = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), n, m);
    for (Index j = 0; j < m; ++j) {
        auto col = data.dosages.col(j);
        double sum = 0.0;
        Index observed = 0;
        for (Index i = 0; i < n; ++i) {
            if (!std::isnan(col[i])) {
                sum += col[i];
                ++observed;
            }
        }
        if (observed == n) continue;
        if (observed == 0) {
            throw ParseError(source + ": SNP '" + data.snp_ids[static_cast<std::size_t>(j)] +
                             "' has no observed dosages");
        }
        const double mean = sum / static_cast<double>(observed);
        for (Index i = 0; i < n; ++i) {
            if (std::isnan(col[i])) {
                col[i] = mean;
                ++data.n_imputed;
            }
        }
    }
    return data;
}

GenotypeData parse_genotypes(const std::filesystem::path& path, GenotypeFormat format) {
    auto in = open_input(path);
    return parse_genotypes(in, format, path.string());
}

SnpIndex::SnpIndex(const std::vector<std::string>& snp_ids) {
    std::unordered_set<std::string> ambiguous;
    for (std::size_t j = 0; j < snp_ids.size(); ++j) {
        const auto& id = snp_ids[j];
        if (!exact_.emplace(id, static_cast<Index>(j)).second) {
            throw ParseError("duplicate SNP id '" + id + "' in genotype header");
        }
        const auto cut = id.rfind('_');
        if (cut != std::string::npos && cut > 0) {
            const std::string stem = id.substr(0, cut);
            if (!stem_.emplace(stem, static_cast<Index>(j)).second) ambiguous.insert(stem);
        }
    }
    for (const auto& s : ambiguous) stem_.erase(s);
}

Index SnpIndex::find(const std::string& id) const {
    if (auto it = exact_.find(id); it != exact_.end()) return it->second;
    if (auto it = stem_.find(id); it != stem_.end()) return it->second;
    return -1;
}

// -------------------------------------------------------------------------
// Phenotypes and gene sets
// -------------------------------------------------------------------------

Index PhenotypeTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (columns[k] == name) return static_cast<Index>(k);
    }
    throw ParameterError("phenotype file has no column '" + name + "'");
}

PhenotypeTable parse_phenotypes(std::istream& in, const std::string& source) {
    std::string line;
    long line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim_cr(line).empty()) {
            header = split_tabs(trim_cr(line));
            break;
        }
    }
    if (header.size() < 2) {
        throw ParseError(where(source, line_no) + ": phenotype header needs an id column and at least one value column",
                         line_no);
    }
    PhenotypeTable t;
    t.columns.assign(header.begin() + 1, header.end());
    std::vector<double> values;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = trim_cr(line);
        if (body.empty()) continue;
        const auto tok = split_tabs(body);
        if (tok.size() != header.size()) {
            std::ostringstream msg;
            msg << where(source, line_no) << ": expected " << header.size() << " fields, found " << tok.size();
            throw ParseError(msg.str(), line_no);
        }
        if (!seen.insert(tok[0]).second) {
            throw ParseError(where(source, line_no) + ": duplicate sample id '" + tok[0] + "'", line_no);
        }
        t.sample_ids.push_back(tok[0]);
        for (std::size_t k = 1; k < tok.size(); ++k) values.push_back(parse_number(tok[k], source, line_no, true));
    }
    if (t.sample_ids.empty()) throw ParseError(source + ": phenotype file has no sample rows", line_no);
    t.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Index>(t.sample_ids.size()), static_cast<Index>(t.columns.size()));
    return t;
}

PhenotypeTable parse_phenotypes(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_phenotypes(in, path.string());
}

std::vector<GeneSetDefinition> parse_gene_sets(std::istream& in, const std::string& source) {
    std::vector<GeneSetDefinition> genes;
    std::unordered_set<std::string> names;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view body = trim_cr(line);
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        auto tok = split_ws(body);
        if (tok.empty()) continue;
        if (tok.size() < 2) {
            throw ParseError(where(source, line_no) + ": gene '" + tok[0] + "' lists no SNPs", line_no);
        }
        if (!names.insert(tok[0]).second) {
            throw ParseError(where(source, line_no) + ": duplicate gene '" + tok[0] + "'", line_no);
        }
        GeneSetDefinition g;
        g.gene_name = tok[0];
        std::unordered_set<std::string> snps;
        for (std::size_t k = 1; k < tok.size(); ++k) {
            if (!snps.insert(tok[k]).second) {
                throw ParseError(where(source, line_no) + ": SNP '" + tok[k] + "' repeated in gene '" +
                                     g.gene_name + "'",
                                 line_no);
            }
            g.snp_ids.push_back(tok[k]);
        }
        genes.push_back(std::move(g));
    }
    return genes;
}

std::vector<GeneSetDefinition> parse_gene_sets(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_gene_sets(in, path.string());
}

std::vector<Index> resolve_gene(const GeneSetDefinition& gene, const SnpIndex& index) {
    std::vector<Index> cols;
    cols.reserve(gene.snp_ids.size());
    std::unordered_set<Index> used;
    for (const auto& id : gene.snp_ids) {
        const Index j = index.find(id);
        if (j < 0) throw ParseError("gene '" + gene.gene_name + "': SNP '" + id + "' not found in genotypes");
        if (!used.insert(j).second) {
            throw ParseError("gene '" + gene.gene_name + "': SNP '" + id + "' resolves to a column already listed");
        }
        cols.push_back(j);
    }
    return cols;
}

AlignedData align_samples(const GenotypeData& geno,
                          const PhenotypeTable& pheno,
                          const std::string& pheno_col,
                          const std::string& env_col,
                          const std::vector<std::string>& covar_cols) {
    const Index y_col = pheno.column(pheno_col);
    const Index e_col = pheno.column(env_col);
    std::vector<Index> c_cols;
    for (const auto& c : covar_cols) c_cols.push_back(pheno.column(c));

    std::unordered_map<std::string, Index> pheno_row;
    for (std::size_t i = 0; i < pheno.sample_ids.size(); ++i) {
        pheno_row.emplace(pheno.sample_ids[i], static_cast<Index>(i));
    }

    AlignedData a;
    std::vector<Index> rows;
    int matched = 0;
    for (std::size_t g = 0; g < geno.sample_ids.size(); ++g) {
        const auto it = pheno_row.find(geno.sample_ids[g]);
        if (it == pheno_row.end()) {
            ++a.skips.genotype_only;
            continue;
        }
        ++matched;
        const Index r = it->second;
        bool complete = std::isfinite(pheno.values(r, y_col)) && std::isfinite(pheno.values(r, e_col));
        for (Index c : c_cols) complete = complete && std::isfinite(pheno.values(r, c));
        if (!complete) {
            ++a.skips.missing_phenotype;
            continue;
        }
        a.genotype_rows.push_back(static_cast<Index>(g));
        a.sample_ids.push_back(geno.sample_ids[g]);
        rows.push_back(r);
    }
    a.skips.phenotype_only = static_cast<int>(pheno.sample_ids.size()) - matched;
    a.skips.used = static_cast<int>(rows.size());
    if (rows.empty()) throw ParameterError("no samples shared between genotype and phenotype files");

    const auto n = static_cast<Index>(rows.size());
    const auto p = static_cast<Index>(c_cols.size()) + 2;
    a.y.resize(n);
    a.X.resize(n, p);
    a.env_col = p - 1;
    for (Index i = 0; i < n; ++i) {
        const Index r = rows[static_cast<std::size_t>(i)];
        a.y[i] = pheno.values(r, y_col);
        a.X(i, 0) = 1.0;
        for (std::size_t k = 0; k < c_cols.size(); ++k) a.X(i, static_cast<Index>(k) + 1) = pheno.values(r, c_cols[k]);
        a.X(i, a.env_col) = pheno.values(r, e_col);
    }
    return a;
}

// -------------------------------------------------------------------------
// Results
// -------------------------------------------------------------------------

std::string format_float(double x) {
    if (std::isnan(x)) return "NA";
    if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5e", x);
    return buf;
}

ResultRow make_row(const std::string& gene, Index n, Index L, const VcTestResult& r) {
    ResultRow row;
    row.gene = gene;
    row.n = n;
    row.L = L;
    row.T = r.statistic_T;
    row.p_davies = r.p_davies;
    row.p_liu = r.p_liu;
    row.tau_hat = r.tau_hat;
    row.sigma_hat = r.sigma_hat;
    row.em_iters = r.n_iter;
    row.converged = r.converged;
    if (r.degenerate) {
        row.status = "degenerate";
    } else if (r.davies_computed && r.davies_status != DaviesStatus::ok) {
        row.status = "davies_" + std::string(to_string(r.davies_status));
    } else if (!r.converged) {
        row.status = "em_not_converged";
    } else {
        row.status = "ok";
    }
    return row;
}

ResultRow make_error_row(const std::string& gene, Index n, Index L, const std::string& reason) {
    ResultRow row;
    row.gene = gene;
    row.n = n;
    row.L = L;
    row.T = row.p_davies = row.p_liu = row.tau_hat = row.sigma_hat = kNaN;
    row.status = "error:" + sanitize(reason);
    return row;
}

void write_results(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kResultHeader << '\n';
    for (const auto& r : rows) {
        out << sanitize(r.gene) << '\t' << r.n << '\t' << r.L << '\t' << format_float(r.T) << '\t'
            << format_float(r.p_davies) << '\t' << format_float(r.p_liu) << '\t' << format_float(r.tau_hat)
            << '\t' << format_float(r.sigma_hat) << '\t' << r.em_iters << '\t' << (r.converged ? 1 : 0)
            << '\t' << sanitize(r.status) << '\n';
    }
}

void write_results(const std::filesystem::path& path, const std::vector<ResultRow>& rows) {
    auto out = open_output(path);
    write_results(out, rows);
    check_written(out, path);
}

std::vector<ResultRow> read_results(std::istream& in, const std::string& source) {
    std::string line;
    long line_no = 1;
    if (!std::getline(in, line) || trim_cr(line) != kResultHeader) {
        throw ParseError(source + ": missing or malformed results header", 1);
    }
    std::vector<ResultRow> rows;
    auto num = [&](const std::string& tok) {
        if (tok == "NA") return kNaN;
        return parse_number(tok, source, line_no, false);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim_cr(line);
        if (body.empty()) continue;
        const auto tok = split_tabs(body);
        if (tok.size() != 11) throw ParseError(where(source, line_no) + ": expected 11 fields", line_no);
        ResultRow r;
        r.gene = tok[0];
        r.n = static_cast<Index>(num(tok[1]));
        r.L = static_cast<Index>(num(tok[2]));
        r.T = num(tok[3]);
        r.p_davies = num(tok[4]);
        r.p_liu = num(tok[5]);
        r.tau_hat = num(tok[6]);
        r.sigma_hat = num(tok[7]);
        r.em_iters = static_cast<int>(num(tok[8]));
        r.converged = tok[9] == "1";
        r.status = tok[10];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ResultRow> read_results(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_results(in, path.string());
}

// -------------------------------------------------------------------------
// Simulation output
// -------------------------------------------------------------------------

void write_replicates(std::ostream& out, const sim::ExperimentReport& report) {
    out << "replicate\tT\tp_value\tp_davies\tp_liu\ttau_hat\tsigma_hat\tem_iters\tconverged\tstatus";
    if (report.config.oracle_compare) out << "\toracle_abs_diff_T";
    out << '\n';
    for (const auto& r : report.records) {
        out << r.index << '\t';
        if (r.failed) {
            out << "NA\tNA\tNA\tNA\tNA\tNA\t0\t0\terror:" << sanitize(r.failure);
            if (report.config.oracle_compare) out << "\tNA";
            out << '\n';
            continue;
        }
        out << format_float(r.T) << '\t' << format_float(r.p_value) << '\t' << format_float(r.p_davies) << '\t'
            << format_float(r.p_liu) << '\t' << format_float(r.tau_hat) << '\t' << format_float(r.sigma_hat)
            << '\t' << r.n_iter << '\t' << (r.converged ? 1 : 0) << '\t'
            << (r.degenerate ? "degenerate" : (r.converged ? "ok" : "em_not_converged"));
        if (report.config.oracle_compare) out << '\t' << format_float(r.oracle_abs_diff_T);
        out << '\n';
    }
}

void write_summary(std::ostream& out, const sim::ExperimentReport& report) {
    const auto& c = report.config;
    out << "key\tvalue\n";
    out << "mode\t" << sim::to_string(c.mode) << '\n';
    out << "n\t" << c.n << '\n' << "L\t" << c.L << '\n';
    if (c.mode == sim::SimMode::random_effects) {
        out << "tau\t" << format_float(c.tau) << "\nsigma\t" << format_float(c.sigma) << "\nnu\t"
            << format_float(c.nu) << '\n';
    } else {
        out << "gamma_G\t" << format_float(c.gamma_G) << "\ngamma_GE\t" << format_float(c.gamma_GE)
            << "\nell\t" << c.ell << "\nsigma\t" << format_float(c.sigma) << '\n';
    }
    out << "replicates\t" << c.replicates << "\nseed\t" << c.seed << '\n';
    out << "ok\t" << report.n_ok << "\nfailed\t" << report.n_failed << "\nnot_converged\t"
        << report.n_not_converged << '\n';
    for (const auto& r : report.rates) {
        const std::string a = format_float(r.alpha);
        out << "rate@" << a << '\t' << format_float(r.rate) << '\n';
        out << "se@" << a << '\t' << format_float(r.se) << '\n';
        out << "ci95@" << a << '\t' << format_float(r.ci_low) << ',' << format_float(r.ci_high) << '\n';
    }
    if (report.has_estimator_summary) {
        out << "bias_tau\t" << format_float(report.estimators.bias_tau) << '\n';
        out << "mse_tau\t" << format_float(report.estimators.mse_tau) << '\n';
        out << "bias_sigma\t" << format_float(report.estimators.bias_sigma) << '\n';
        out << "mse_sigma\t" << format_float(report.estimators.mse_sigma) << '\n';
    }
    if (c.oracle_compare) out << "max_oracle_abs_diff_T\t" << format_float(report.max_oracle_abs_diff_T) << '\n';
}

void write_timings(std::ostream& out, const sim::ExperimentReport& report) {
    out << "replicate\tseconds\n";
    for (const auto& r : report.records) out << r.index << '\t' << format_float(r.wall_seconds) << '\n';
}

}  // namespace seagle::io
