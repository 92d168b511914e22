import init, { bodyScene, flowScene, liftScene } from "./pkg/liftlab_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function showOutputs() {
  for (const o of document.querySelectorAll("output")) {
    o.value = $(o.htmlFor).value;
  }
}

function attempt(target, f) {
  try {
    f();
  } catch (e) {
    $(target).innerHTML = `<span class="error">${e.message ?? e}</span>`;
  }
}

function drawBody() {
  attempt("body-stats", () => {
    const s = JSON.parse(bodyScene(num("eps"), num("l"), num("h"), num("gamma"), num("meshh")));
    $("shapes").innerHTML = s.shapes_svg;
    $("mesh").innerHTML = s.mesh_svg;
    $("body-stats").textContent =
      `area ${s.area.toFixed(5)}, ${s.vertices.length} vertices; ` +
      `mesh ${s.nodes} nodes, ${s.triangles} triangles, min angle ${s.min_angle_deg.toFixed(1)}°`;
  });
}

function drawFlow() {
  attempt("flow-stats", () => {
    const s = JSON.parse(flowScene(num("amp"), num("k"), num("delta")));
    $("profiles").innerHTML = s.svg;
    $("flow-stats").textContent =
      `W1,∞ norm ${s.norm.toFixed(4)}, flux in ${s.flux_in.toFixed(6)}, flux out ${s.flux_out.toFixed(6)}`;
  });
}

function drawLift() {
  $("lift-stats").textContent = "solving…";
  // let the status text paint before the solver blocks the thread
  setTimeout(() => {
    attempt("lift-stats", () => {
      const t0 = performance.now();
      const s = JSON.parse(
        liftScene(num("eps"), num("l"), num("h"), num("gamma"), num("amp"), num("delta"),
          num("lmax"), num("points"), num("meshh")),
      );
      $("curve").innerHTML = s.svg;
      const peak = Math.max(...s.lifts.map(Math.abs));
      let text = `${s.lambdas.length} solves in ${((performance.now() - t0) / 1000).toFixed(1)} s, ` +
        `max |lift| ${peak.toExponential(4)}`;
      if (s.failure) text += `; stopped early: ${s.failure}`;
      $("lift-stats").textContent = text;
    });
  }, 20);
}

await init();
showOutputs();
for (const id of ["eps", "l", "h", "gamma", "meshh"]) {
  $(id).addEventListener("input", () => { showOutputs(); drawBody(); });
}
for (const id of ["amp", "k", "delta"]) {
  $(id).addEventListener("input", () => { showOutputs(); drawFlow(); });
}
$("run").addEventListener("click", drawLift);
drawBody();
drawFlow();
