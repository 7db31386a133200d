// Entry point: mount the review desk.
//
// The service base URL and reviewer id come from query parameters so one
// build works against any deployment:
//
//   index.html?api=http://127.0.0.1:8080&reviewer=dr-blue

import { TriageClient } from "./apiClient.js";
import { ReviewDeskPage } from "./page.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? window.location.origin;
const reviewerId = params.get("reviewer") ?? "anonymous";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}

const client = new TriageClient({ baseUrl, reviewerId });
const page = new ReviewDeskPage(root, client);
void page.start();
