#define DOCTEST_CONFIG_IMPLEMENT
#include <gsl/gsl_errno.h>

#include "doctest.h"

int main(int argc, char** argv) {
  gsl_set_error_handler_off();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
