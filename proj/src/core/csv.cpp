#include "core/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ripple {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvReader {
    std::ifstream file;
    std::string path;
    int lineno = 0;

    CsvReader(const std::string& p, const std::string& expected_header) : file(p), path(p) {
        if (!file) fail_io("cannot open " + p);
        std::string header = next();
        if (header != expected_header)
            fail_io(path + ": line 1: expected header '" + expected_header + "'");
    }

    bool eof() { return file.peek() == std::char_traits<char>::eof(); }

    std::string next() {
        std::string line;
        if (!std::getline(file, line))
            fail_io(path + ": line " + std::to_string(lineno + 1) + ": unexpected end of file");
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }

    std::vector<std::string> fields(std::size_t expect) {
        std::string line = next();
        std::vector<std::string> out;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            out.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (out.size() != expect)
            fail_io(path + ": line " + std::to_string(lineno) + ": expected " +
                    std::to_string(expect) + " fields, got " + std::to_string(out.size()));
        return out;
    }

    double num(const std::string& field) {
        try {
            std::size_t used = 0;
            double v = std::stod(field, &used);
            if (used != field.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail_io(path + ": line " + std::to_string(lineno) + ": bad number '" + field + "'");
        }
    }

    std::int64_t integer(const std::string& field) {
        try {
            std::size_t used = 0;
            long long v = std::stoll(field, &used);
            if (used != field.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            fail_io(path + ": line " + std::to_string(lineno) + ": bad integer '" + field + "'");
        }
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) fail_io("cannot open " + path + " for writing");
    return f;
}

void check_write(std::ofstream& f, const std::string& path) {
    f.flush();
    if (!f) fail_io("write failure on " + path);
}

}  // namespace

void save_stream_csv(const SampleStream& stream, const std::string& path) {
    auto f = open_out(path);
    f << "sample_index,time_s,current_A\n";
    for (std::size_t i = 0; i < stream.size(); ++i)
        f << i << ',' << fmt(static_cast<double>(i) / stream.fs) << ',' << fmt(stream.current[i])
          << '\n';
    check_write(f, path);
}

SampleStream load_stream_csv(const std::string& path) {
    CsvReader r(path, "sample_index,time_s,current_A");
    SampleStream s;
    double last_t = 0.0;
    while (!r.eof()) {
        auto f = r.fields(3);
        auto idx = r.integer(f[0]);
        if (idx != static_cast<std::int64_t>(s.current.size()))
            fail_io(path + ": line " + std::to_string(r.lineno) + ": non-contiguous sample_index");
        last_t = r.num(f[1]);
        s.current.push_back(r.num(f[2]));
    }
    if (s.current.size() < 2) fail_io(path + ": stream needs at least 2 samples");
    double fs = static_cast<double>(s.current.size() - 1) / last_t;
    double snapped = std::round(fs);
    s.fs = std::abs(fs - snapped) < 1e-6 * snapped ? snapped : fs;
    return s;
}

void save_truth_csv(const GroundTruth& truth, const std::string& path) {
    auto f = open_out(path);
    f << "sample_index,speed_rpm,position_rad,pulse_flag\n";
    std::size_t next_pulse = 0;
    for (std::size_t i = 0; i < truth.speed_rpm.size(); ++i) {
        int flag = 0;
        if (next_pulse < truth.pulse_indices.size() &&
            truth.pulse_indices[next_pulse] == static_cast<std::int64_t>(i)) {
            flag = 1;
            ++next_pulse;
        }
        f << i << ',' << fmt(truth.speed_rpm[i]) << ',' << fmt(truth.position_rad[i]) << ','
          << flag << '\n';
    }
    check_write(f, path);
}

GroundTruth load_truth_csv(const std::string& path) {
    CsvReader r(path, "sample_index,speed_rpm,position_rad,pulse_flag");
    GroundTruth t;
    while (!r.eof()) {
        auto f = r.fields(4);
        auto idx = r.integer(f[0]);
        if (idx != static_cast<std::int64_t>(t.speed_rpm.size()))
            fail_io(path + ": line " + std::to_string(r.lineno) + ": non-contiguous sample_index");
        t.speed_rpm.push_back(r.num(f[1]));
        t.position_rad.push_back(r.num(f[2]));
        auto flag = r.integer(f[3]);
        if (flag != 0 && flag != 1)
            fail_io(path + ": line " + std::to_string(r.lineno) + ": pulse_flag must be 0 or 1");
        if (flag) t.pulse_indices.push_back(idx);
    }
    return t;
}

void save_estimates_csv(const std::vector<EstimateRecord>& records, const std::string& path) {
    auto f = open_out(path);
    f << "sample_index,pulse_flag,speed_rpm,position_rad\n";
    for (const auto& r : records) {
        f << r.sample_index << ',' << (r.pulse ? 1 : 0) << ',';
        if (r.has_speed) f << fmt(r.speed_rpm);
        f << ',' << fmt(r.position_rad) << '\n';
    }
    check_write(f, path);
}

std::vector<EstimateRecord> load_estimates_csv(const std::string& path) {
    CsvReader r(path, "sample_index,pulse_flag,speed_rpm,position_rad");
    std::vector<EstimateRecord> out;
    while (!r.eof()) {
        auto f = r.fields(4);
        EstimateRecord rec;
        rec.sample_index = r.integer(f[0]);
        auto flag = r.integer(f[1]);
        if (flag != 0 && flag != 1)
            fail_io(path + ": line " + std::to_string(r.lineno) + ": pulse_flag must be 0 or 1");
        rec.pulse = flag == 1;
        rec.has_speed = !f[2].empty();
        if (rec.has_speed) rec.speed_rpm = r.num(f[2]);
        rec.position_rad = r.num(f[3]);
        out.push_back(rec);
    }
    return out;
}

void save_errors_csv(const std::vector<StreamEval>& rows, const std::string& path) {
    auto f = open_out(path);
    f << "real_speed_rpm,mean_abs_err_rpm,mean_rel_err_pct,dev_abs_rpm,dev_rel_pct,"
         "mean_abs_pos_err_rad\n";
    for (const auto& ev : rows)
        f << fmt(ev.mean_true_speed_rpm) << ',' << fmt(ev.mean_abs_err_rpm) << ','
          << fmt(ev.mean_rel_err_pct) << ',' << fmt(ev.dev_abs_rpm) << ',' << fmt(ev.dev_rel_pct)
          << ',' << fmt(ev.mean_abs_pos_err_rad) << '\n';
    check_write(f, path);
}

void save_manifest_csv(const std::vector<CorruptionEvent>& events, const std::string& path) {
    auto f = open_out(path);
    f << "kind,time_s\n";
    for (const auto& e : events) f << (e.ghost ? "ghost" : "false") << ',' << fmt(e.time_s) << '\n';
    check_write(f, path);
}

std::vector<CorruptionEvent> load_manifest_csv(const std::string& path) {
    CsvReader r(path, "kind,time_s");
    std::vector<CorruptionEvent> out;
    while (!r.eof()) {
        auto f = r.fields(2);
        CorruptionEvent e;
        if (f[0] == "ghost")
            e.ghost = true;
        else if (f[0] == "false")
            e.ghost = false;
        else
            fail_io(path + ": line " + std::to_string(r.lineno) + ": kind must be false or ghost");
        e.time_s = r.num(f[1]);
        out.push_back(e);
    }
    return out;
}

void save_comparison_csv(const ComparisonTable& table, const std::string& path) {
    auto f = open_out(path);
    f << "scope,method,kind,time_s,outcome,detected,truth,count_error\n";
    for (const auto& s : table.summaries)
        f << "total," << s.method << ",,,," << s.detected << ',' << s.truth << ','
          << s.count_error << '\n';
    for (const auto& e : table.events)
        f << "event," << e.method << ',' << (e.event.ghost ? "ghost" : "false") << ','
          << fmt(e.event.time_s) << ',' << e.outcome << ",,,\n";
    check_write(f, path);
}

}  // namespace ripple
