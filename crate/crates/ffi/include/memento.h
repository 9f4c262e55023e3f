#ifndef MEMENTO_H
#define MEMENTO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MementoStatus {
  MEMENTO_STATUS_OK = 0,
  MEMENTO_STATUS_NULL_ARGUMENT = 1,
  MEMENTO_STATUS_INVALID_UTF8 = 2,
  MEMENTO_STATUS_MALFORMED_DATE = 3,
  MEMENTO_STATUS_MALFORMED_URI = 4,
  MEMENTO_STATUS_IO = 5,
  MEMENTO_STATUS_CORRUPT_ARCHIVE = 6,
  MEMENTO_STATUS_UNKNOWN_SUBJECT = 7,
  MEMENTO_STATUS_NO_MEMENTOS = 8,
  MEMENTO_STATUS_PANIC = 9,
} MementoStatus;

typedef enum MementoDecisionKind {
  MEMENTO_DECISION_KIND_REDIRECT_TO_MEMENTO = 0,
  MEMENTO_DECISION_KIND_REDIRECT_TO_ORIGINAL = 1,
  MEMENTO_DECISION_KIND_MULTIPLE_CHOICES = 2,
  MEMENTO_DECISION_KIND_NOT_ACCEPTABLE = 3,
} MementoDecisionKind;

/**
 * An opened archive and the HTTP service over it.
 */
typedef struct MementoArchive MementoArchive;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses an HTTP-date into seconds since the Unix epoch.
 *
 * # Safety
 * `raw` is a NUL-terminated string; `out_unix` is writable.
 */
enum MementoStatus memento_parse_http_date(const char *raw, int64_t *out_unix);

/**
 * # Safety
 * `out` is writable.
 */
enum MementoStatus memento_format_http_date(int64_t unix_seconds, char **out);

/**
 * Opens an ingested archive. Resource URIs are minted under `base_url`.
 *
 * # Safety
 * `dir` and `base_url` are NUL-terminated strings; `out` is writable.
 */
enum MementoStatus memento_archive_open(const char *dir,
                                        const char *base_url,
                                        struct MementoArchive **out);

/**
 * # Safety
 * `archive` is null or a handle from [`memento_archive_open`] not yet freed.
 */
void memento_archive_free(struct MementoArchive *archive);

/**
 * Runs datetime negotiation for `subject`. `accept_datetime` may be null
 * for a request without `Accept-Datetime`. `out_location` receives the
 * redirect target, or null for the other decisions.
 *
 * # Safety
 * `archive` is a live handle; `subject` a NUL-terminated string;
 * `accept_datetime` null or readable; the out pointers writable.
 */
enum MementoStatus memento_negotiate(const struct MementoArchive *archive,
                                     const char *subject,
                                     const int64_t *accept_datetime,
                                     enum MementoDecisionKind *out_kind,
                                     char **out_location);

/**
 * The RDF/XML TimeMap of `subject`.
 *
 * # Safety
 * `archive` is a live handle; `subject` a NUL-terminated string; `out` writable.
 */
enum MementoStatus memento_timemap(const struct MementoArchive *archive,
                                   const char *subject,
                                   char **out);

/**
 * Answers one HTTP request in-process. `headers` holds `Name: value`
 * lines and may be null. Response headers come back in the same form.
 *
 * # Safety
 * String arguments are NUL-terminated (or null where allowed); out
 * pointers are writable.
 */
enum MementoStatus memento_service_request(const struct MementoArchive *archive,
                                           const char *method,
                                           const char *target,
                                           const char *headers,
                                           uint16_t *out_status,
                                           char **out_headers,
                                           uint8_t **out_body,
                                           size_t *out_body_len);

/**
 * # Safety
 * `s` is null or a string returned by this library, not yet freed.
 */
void memento_string_free(char *s);

/**
 * # Safety
 * `ptr`/`len` came from [`memento_service_request`] and are not yet freed.
 */
void memento_bytes_free(uint8_t *ptr, size_t len);

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *memento_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEMENTO_H */
