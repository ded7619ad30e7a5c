#include "cvarlq/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cvarlq {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Json matrices_to_json(const std::vector<Mat>& ms) {
    Json arr = Json::array();
    for (const Mat& m : ms) {
        arr.push_back(m.size() == 0 ? Json() : matrix_to_json(m));
    }
    return arr;
}

} // namespace

Json matrix_to_json(const Mat& M) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(row);
    }
    return rows;
}

Mat matrix_from_json(const Json& j, const char* field) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty()) {
        throw Error(ErrorKind::ParseError,
                    std::string(field) + ": expected a non-empty nested array of numbers");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Mat M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) {
            throw Error(ErrorKind::ParseError, std::string(field) + ": ragged matrix rows");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[i][c].is_number()) {
                throw Error(ErrorKind::ParseError, std::string(field) + ": non-numeric entry");
            }
            const double v = j[i][c].get<double>();
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::ParseError, std::string(field) + ": non-finite entry");
            }
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return M;
}

Json problem_to_json(const LqProblem& p) {
    return Json{{"A", matrix_to_json(p.A)},   {"B", matrix_to_json(p.B)},
                {"Q", matrix_to_json(p.Q)},   {"R", matrix_to_json(p.R)},
                {"Qf", matrix_to_json(p.Qf)}, {"Sigma", matrix_to_json(p.Sigma)},
                {"N", p.N}};
}

LqProblem problem_from_json(const Json& j) {
    for (const char* field : {"A", "B", "Q", "R", "Qf", "Sigma", "N"}) {
        if (!j.contains(field)) {
            throw Error(ErrorKind::ParseError, std::string("problem: missing field ") + field);
        }
    }
    LqProblem p;
    p.A = matrix_from_json(j["A"], "A");
    p.B = matrix_from_json(j["B"], "B");
    p.Q = matrix_from_json(j["Q"], "Q");
    p.R = matrix_from_json(j["R"], "R");
    p.Qf = matrix_from_json(j["Qf"], "Qf");
    p.Sigma = matrix_from_json(j["Sigma"], "Sigma");
    if (!j["N"].is_number_integer()) {
        throw Error(ErrorKind::ParseError, "problem: N must be an integer");
    }
    p.N = j["N"].get<int>();
    return p;
}

Json schedule_to_json(const AcvarSchedule& s) {
    return Json{{"family", "acvar"}, {"L", matrix_to_json(s.L)},
                {"P", matrices_to_json(s.P)}, {"a", s.a},
                {"S", matrices_to_json(s.S)}, {"K", matrices_to_json(s.K)}};
}

Json schedule_to_json(const LeqrSchedule& s) {
    return Json{{"family", "leqr"},   {"gamma", s.gamma},
                {"Pbar", matrices_to_json(s.Pbar)}, {"Ptilde", matrices_to_json(s.Ptilde)},
                {"K", matrices_to_json(s.K)},       {"feasible", s.feasible},
                {"failed_at", s.failed_at}};
}

Json schedule_to_json(const LqGameSchedule& s) {
    return Json{{"family", "lqgame"},
                {"lambda", s.lambda},
                {"Phat", matrices_to_json(s.Phat)},
                {"feasible", s.feasible},
                {"failed_at", s.failed_at}};
}

Json schedule_to_json(const LqrSchedule& s) {
    return Json{{"family", "lqr"}, {"P", matrices_to_json(s.P)}, {"K", matrices_to_json(s.K)}};
}

Json certificate_to_json(const LmiCertificate& cert, const Vec& x, double s) {
    Json jx = Json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) jx.push_back(x(i));
    Json ju = Json::array();
    for (Eigen::Index i = 0; i < cert.u.size(); ++i) ju.push_back(cert.u(i));
    return Json{{"t", cert.t},          {"x", jx},        {"s", s},
                {"u", ju},              {"min_eig", cert.min_eig},
                {"passed", cert.passed}};
}

std::vector<CsvRecord> sweep_to_records(const std::vector<SweepRow>& rows,
                                        std::uint64_t seed) {
    std::vector<CsvRecord> records;
    for (const SweepRow& row : rows) {
        for (const auto& [alpha, cv] : row.stats.cvar) {
            CsvRecord rec;
            rec.family = row.family;
            rec.parameter = row.parameter;
            rec.trials = row.stats.trials;
            rec.mean = row.stats.mean;
            rec.std = row.stats.std;
            rec.stderr_ = row.stats.standard_error;
            rec.cvar_alpha = cv;
            rec.alpha = alpha;
            rec.seed = seed;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::string records_to_csv(const std::vector<CsvRecord>& records) {
    std::ostringstream os;
    os << "family,parameter,trials,mean,std,stderr,cvar_alpha,alpha,seed\n";
    for (const CsvRecord& r : records) {
        os << r.family << ',' << fmt_double(r.parameter) << ',' << r.trials << ','
           << fmt_double(r.mean) << ',' << fmt_double(r.std) << ',' << fmt_double(r.stderr_)
           << ',' << fmt_double(r.cvar_alpha) << ',' << fmt_double(r.alpha) << ',' << r.seed
           << '\n';
    }
    return os.str();
}

std::vector<CsvRecord> records_from_csv(const std::string& csv) {
    std::istringstream is(csv);
    std::string line;
    if (!std::getline(is, line) ||
        line != "family,parameter,trials,mean,std,stderr,cvar_alpha,alpha,seed") {
        throw Error(ErrorKind::ParseError, "csv: bad header");
    }
    std::vector<CsvRecord> records;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> parts;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            parts.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (parts.size() != 9) throw Error(ErrorKind::ParseError, "csv: bad column count");
        CsvRecord r;
        r.family = parts[0];
        try {
            r.parameter = std::stod(parts[1]);
            r.trials = std::stol(parts[2]);
            r.mean = std::stod(parts[3]);
            r.std = std::stod(parts[4]);
            r.stderr_ = std::stod(parts[5]);
            r.cvar_alpha = std::stod(parts[6]);
            r.alpha = std::stod(parts[7]);
            r.seed = std::stoull(parts[8]);
        } catch (const std::exception&) {
            throw Error(ErrorKind::ParseError, "csv: bad numeric field in line: " + line);
        }
        records.push_back(std::move(r));
    }
    return records;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw Error(ErrorKind::InvalidArgument, "atomic_write: cannot open " + tmp.string());
        }
        os << content;
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error(ErrorKind::ParseError, "cannot open file: " + path.string());
    }
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

} // namespace cvarlq
