/* Exercises libqlrg through its C header only. */

#include "qlrg/qlrg.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: CHECK failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

int main(int argc, char** argv) {
  const char* out_dir = argc > 1 ? argv[1] : "c_api_out";
  qlrg_modes* modes = NULL;
  qlrg_covariance *hi = NULL, *lo = NULL;
  qlrg_poly *s = NULL, *u = NULL, *back = NULL;
  size_t n = 0;
  double c = 0.0, re = 0.0, im = 0.0, off = -1.0;
  int ql = 0, verdict = -1;
  char* json = NULL;

  CHECK(qlrg_modes_box(1, 2, &modes) == QLRG_OK);
  CHECK(qlrg_modes_size(modes, &n) == QLRG_OK && n == 5);
  CHECK(qlrg_covariance_new(modes, 4.0, &hi) == QLRG_OK);
  CHECK(qlrg_covariance_new(modes, 2.0, &lo) == QLRG_OK);
  /* ordinal 0 is the mode -2: e^{-4/4} / (2 * 5) */
  CHECK(qlrg_covariance_value(hi, 0, &c) == QLRG_OK && fabs(c - exp(-1.0) / 10.0) < 1e-15);

  CHECK(qlrg_poly_phi4(hi, 0.1, 1.0, &s) == QLRG_OK);
  CHECK(qlrg_poly_is_quasilocal(s, &ql, &off) == QLRG_OK && ql == 1 && off == 0.0);
  CHECK(qlrg_poly_u_apply(s, 2.0, &u) == QLRG_OK);
  /* E_{mu_lo}[U S] = E_{mu_hi}[S] */
  {
    double a = 0.0, b = 0.0;
    CHECK(qlrg_poly_expectation(s, hi, &a, NULL) == QLRG_OK);
    CHECK(qlrg_poly_expectation(u, lo, &b, NULL) == QLRG_OK);
    CHECK(fabs(a - b) < 1e-12);
  }
  CHECK(qlrg_poly_inner_product(s, s, &re, &im) == QLRG_OK && re > 0.0 && fabs(im) < 1e-15);

  CHECK(qlrg_poly_to_json(s, &json) == QLRG_OK && strstr(json, "qlrg.wickpoly/1") != NULL);
  CHECK(qlrg_poly_from_json(json, &back) == QLRG_OK);
  {
    size_t a = 0, b = 0;
    CHECK(qlrg_poly_size(s, &a) == QLRG_OK && qlrg_poly_size(back, &b) == QLRG_OK && a == b && a > 0);
  }
  qlrg_string_free(json);

  /* errors */
  {
    qlrg_covariance* bad = NULL;
    qlrg_poly* bad_u = NULL;
    CHECK(qlrg_covariance_new(modes, -1.0, &bad) == QLRG_ERR_INVALID_ARGUMENT && bad == NULL);
    CHECK(strlen(qlrg_last_error()) > 0);
    CHECK(qlrg_poly_u_apply(s, 8.0, &bad_u) == QLRG_ERR_INVALID_ARGUMENT);
    CHECK(qlrg_poly_from_json("{", &bad_u) == QLRG_ERR_PARSE);
    CHECK(qlrg_poly_inner_product(s, u, &re, &im) == QLRG_ERR_ORDERING_MISMATCH);
    CHECK(qlrg_modes_size(NULL, &n) == QLRG_ERR_INVALID_ARGUMENT);
  }

  /* experiments */
  CHECK(qlrg_run_experiment("wick-check", "{\"checks\": {\"wick_degree\": 4}}", out_dir, &verdict) == QLRG_OK);
  CHECK(verdict == 0);
  CHECK(qlrg_run_experiment("wick-check", "{\"nmax\": ", out_dir, &verdict) == QLRG_ERR_PARSE);
  CHECK(qlrg_run_experiment("wick-check", "{\"nmx\": 2}", out_dir, &verdict) == QLRG_ERR_PARSE);
  CHECK(qlrg_run_experiment("integrate-out", "{\"lambda_lo\": 5.0}", out_dir, &verdict) ==
        QLRG_ERR_INVALID_ARGUMENT);
  CHECK(qlrg_run_experiment("no-such-thing", NULL, out_dir, &verdict) == QLRG_ERR_INVALID_ARGUMENT);
  CHECK(qlrg_default_config(&json) == QLRG_OK && strstr(json, "qlrg.config/1") != NULL);
  qlrg_string_free(json);

  qlrg_poly_free(back);
  qlrg_poly_free(u);
  qlrg_poly_free(s);
  qlrg_covariance_free(lo);
  qlrg_covariance_free(hi);
  qlrg_modes_free(modes);
  qlrg_poly_free(NULL);

  if (failures) fprintf(stderr, "%d checks failed\n", failures);
  else printf("c api: all checks passed (%s)\n", qlrg_version());
  return failures ? 1 : 0;
}
