import init, { simulate, logLikelihood, sample } from "./pkg/dollo_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guard(f) {
  return () => {
    $("error").textContent = "";
    try {
      f();
    } catch (e) {
      $("error").textContent = e.message ?? String(e);
    }
  };
}

function plot(canvas, ys) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const lo = Math.min(...ys), hi = Math.max(...ys);
  const y = (v) => h - 10 - ((v - lo) / (hi - lo || 1)) * (h - 20);
  g.beginPath();
  ys.forEach((v, i) => {
    const x = (i / Math.max(ys.length - 1, 1)) * w;
    i ? g.lineTo(x, y(v)) : g.moveTo(x, y(v));
  });
  g.stroke();
  g.fillText(hi.toFixed(0), 4, 12);
  g.fillText(lo.toFixed(0), 4, h - 2);
}

function mean(xs) {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

await init();

$("simulate").onclick = guard(() => {
  const out = JSON.parse(simulate(num("leaves"), num("traits"), num("psi"), num("kappa"),
    num("catRate"), $("missing").checked, num("seed")));
  $("nexus").value = out.nexus;
  $("newick").value = out.tree;
  $("truth").textContent = `${out.tree}\nroot age ${out.rootAge.toFixed(0)} years, ${out.traits} traits`;
  $("cats").checked = num("kappa") > 0;
});

$("score").onclick = guard(() => {
  const ll = logLikelihood($("nexus").value, $("newick").value, num("psi"), num("kappa"));
  $("loglik").textContent = ll.toFixed(4);
});

$("run").onclick = guard(() => {
  const out = JSON.parse(sample($("nexus").value, num("steps"), num("interval"),
    $("cats").checked, num("seed")));
  plot($("trace"), out.rootAge);
  const half = (xs) => xs.slice(Math.floor(xs.length / 2));
  $("summary").textContent = `second half: mean root age ${mean(half(out.rootAge)).toFixed(0)} years, ` +
    `mean loss rate ${mean(half(out.mu)).toExponential(3)} per year, ` +
    `final log-likelihood ${out.logLikelihood.at(-1).toFixed(3)}`;
  $("consensus").textContent = out.consensus;
});
