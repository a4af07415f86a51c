#include "qlrg/qlrg.h"

#include "qlrg/actions.hpp"
#include "qlrg/error.hpp"
#include "qlrg/harness.hpp"
#include "qlrg/rg_linear.hpp"
#include "qlrg/serialize.hpp"

#include <cstring>
#include <string>

struct qlrg_modes {
  qlrg::ModeSetPtr ptr;
};
struct qlrg_covariance {
  qlrg::CovariancePtr ptr;
};
struct qlrg_poly {
  qlrg::WickPoly poly;
};

namespace {

thread_local std::string last_error;

template <class F>
qlrg_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return QLRG_OK;
  } catch (const qlrg::Error& e) {
    last_error = e.what();
    return static_cast<qlrg_status>(static_cast<int>(e.code()));
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return QLRG_ERR_PARSE;
  } catch (const std::exception& e) {
    last_error = e.what();
    return QLRG_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return QLRG_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) { qlrg::require(p != nullptr, std::string(what) + " is null"); }

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

} // namespace

extern "C" {

const char* qlrg_version(void) { return "0.1.0"; }
const char* qlrg_last_error(void) { return last_error.c_str(); }
void qlrg_string_free(char* s) { delete[] s; }

qlrg_status qlrg_modes_box(int dim, int nmax, qlrg_modes** out) {
  return guarded([&] {
    need(out, "out");
    *out = new qlrg_modes{qlrg::build_mode_set(dim, nmax)};
  });
}

qlrg_status qlrg_modes_size(const qlrg_modes* m, size_t* out) {
  return guarded([&] {
    need(m, "modes");
    need(out, "out");
    *out = m->ptr->size();
  });
}

void qlrg_modes_free(qlrg_modes* m) { delete m; }

qlrg_status qlrg_covariance_new(const qlrg_modes* m, double lambda, qlrg_covariance** out) {
  return guarded([&] {
    need(m, "modes");
    need(out, "out");
    *out = new qlrg_covariance{qlrg::make_covariance(m->ptr, lambda)};
  });
}

qlrg_status qlrg_covariance_value(const qlrg_covariance* c, size_t ordinal, double* out) {
  return guarded([&] {
    need(c, "covariance");
    need(out, "out");
    qlrg::require(ordinal < c->ptr->modes()->size(), "ordinal out of range");
    *out = (*c->ptr)[ordinal];
  });
}

void qlrg_covariance_free(qlrg_covariance* c) { delete c; }

qlrg_status qlrg_poly_phi4(const qlrg_covariance* c, double lambda, double m2, qlrg_poly** out) {
  return guarded([&] {
    need(c, "covariance");
    need(out, "out");
    const auto spec = qlrg::phi4_lagrangian(c->ptr->modes()->dim(), lambda, m2);
    *out = new qlrg_poly{qlrg::compile_local(spec, c->ptr)};
  });
}

qlrg_status qlrg_poly_from_json(const char* json, qlrg_poly** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new qlrg_poly{qlrg::wick_from_json(nlohmann::json::parse(json))};
  });
}

qlrg_status qlrg_poly_to_json(const qlrg_poly* p, char** out) {
  return guarded([&] {
    need(p, "poly");
    need(out, "out");
    *out = dup(qlrg::to_json(p->poly).dump());
  });
}

qlrg_status qlrg_poly_size(const qlrg_poly* p, size_t* out) {
  return guarded([&] {
    need(p, "poly");
    need(out, "out");
    *out = p->poly.size();
  });
}

qlrg_status qlrg_poly_is_quasilocal(const qlrg_poly* p, int* quasilocal, double* off_shell_mass) {
  return guarded([&] {
    need(p, "poly");
    const auto r = qlrg::is_quasilocal(p->poly);
    if (quasilocal) *quasilocal = r.quasilocal ? 1 : 0;
    if (off_shell_mass) *off_shell_mass = r.off_shell_mass;
  });
}

qlrg_status qlrg_poly_u_apply(const qlrg_poly* p, double lambda_lo, qlrg_poly** out) {
  return guarded([&] {
    need(p, "poly");
    need(out, "out");
    *out = new qlrg_poly{qlrg::u_apply(p->poly, lambda_lo)};
  });
}

qlrg_status qlrg_poly_expectation(const qlrg_poly* p, const qlrg_covariance* target, double* re,
                                  double* im) {
  return guarded([&] {
    need(p, "poly");
    need(target, "target");
    const auto v = qlrg::expectation(p->poly, *target->ptr);
    if (re) *re = v.real();
    if (im) *im = v.imag();
  });
}

qlrg_status qlrg_poly_inner_product(const qlrg_poly* p, const qlrg_poly* q, double* re, double* im) {
  return guarded([&] {
    need(p, "p");
    need(q, "q");
    const auto v = qlrg::inner_product(p->poly, q->poly);
    if (re) *re = v.real();
    if (im) *im = v.imag();
  });
}

void qlrg_poly_free(qlrg_poly* p) { delete p; }

qlrg_status qlrg_default_config(char** out) {
  return guarded([&] {
    need(out, "out");
    *out = dup(qlrg::to_json(qlrg::ExperimentConfig{}).dump(2));
  });
}

qlrg_status qlrg_run_experiment(const char* subcommand, const char* config_json, const char* out_dir,
                                int* exit_code) {
  return guarded([&] {
    need(subcommand, "subcommand");
    need(exit_code, "exit_code");
    qlrg::ExperimentConfig cfg;
    if (config_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::parse_error& e) {
        qlrg::fail(qlrg::ErrorCode::parse, std::string("config is not valid JSON: ") + e.what());
      }
      cfg = qlrg::config_from_json(j);
    }
    const auto result = qlrg::run_experiment(subcommand, cfg);
    qlrg::write_artifacts(result, out_dir ? std::string(out_dir) : cfg.out_dir);
    *exit_code = result.exit_code;
  });
}

} // extern "C"
