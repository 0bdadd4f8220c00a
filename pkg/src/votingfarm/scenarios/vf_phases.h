/* Phase codes a voter reports to the director database. */
#define VFP_INIT      0
#define VFP_BROADCAST 1
#define VFP_VOTING    2
#define VFP_SUCCESS   3
#define VFP_FAILURE   4
