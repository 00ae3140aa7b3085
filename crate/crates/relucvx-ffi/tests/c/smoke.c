#include <math.h>
#include <stdio.h>
#include <string.h>

#include "relucvx.h"

#define CHECK(cond)                                              \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,    \
              #cond, relucvx_last_error());                      \
      return 1;                                                  \
    }                                                            \
  } while (0)

int main(void) {
  const double x[] = {-1, -1, -1, 1, 1, -1, 1, 1, -0.5, -0.6, -0.6, 0.5, 0.6, -0.5, 0.5, 0.6};
  const double y[] = {1, -1, -1, 1, 1, -1, -1, 1};
  RelucvxDataset *data = NULL;
  CHECK(relucvx_dataset_new(x, 8, 2, y, RELUCVX_TASK_BINARY, RELUCVX_BIAS_PERTURBED, &data) == RELUCVX_STATUS_OK);
  CHECK(relucvx_dataset_cols(data) == 3);

  RelucvxTrainOptions opts;
  CHECK(relucvx_train_options_default(&opts) == RELUCVX_STATUS_OK);
  opts.ps = opts.pa = 20;
  opts.beta = 1e-3;
  RelucvxModel *model = NULL;
  CHECK(relucvx_train(data, &opts, &model) == RELUCVX_STATUS_OK);
  CHECK(relucvx_model_width(model) > 0);

  RelucvxEvaluation eval;
  CHECK(relucvx_model_evaluate(model, data, 0.0, &eval) == RELUCVX_STATUS_OK);
  CHECK(eval.clean == 1.0);

  double row[3] = {1, 1, 1}, out = NAN;
  CHECK(relucvx_model_predict(model, row, 1, 3, &out) == RELUCVX_STATUS_OK);
  CHECK(out >= 0.0);
  CHECK(relucvx_model_predict(model, row, 1, 2, &out) == RELUCVX_STATUS_DIMENSION);
  CHECK(strlen(relucvx_last_error()) > 0);

  char *json = NULL;
  CHECK(relucvx_model_to_json(model, &json) == RELUCVX_STATUS_OK);
  RelucvxModel *back = NULL;
  CHECK(relucvx_model_from_json(json, &back) == RELUCVX_STATUS_OK);
  CHECK(relucvx_model_objective(back) == relucvx_model_objective(model));

  relucvx_string_free(json);
  relucvx_model_free(back);
  relucvx_model_free(model);
  relucvx_dataset_free(data);
  printf("ok %s\n", relucvx_version());
  return 0;
}
