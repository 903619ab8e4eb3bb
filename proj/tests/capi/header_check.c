/* The public header must compile as C. */
#include "olia/olia.h"

int olia_header_check_c(void) {
  olia_frame frame = {0};
  olia_device* device = 0;
  (void)device;
  return frame.input_gain + (int)OLIA_OK;
}
