/** Static vector banner rendered from the "banner-colors" template.
 *
 * The six parameters are two sRGB triplets in [0, 1]: background then
 * foreground.  Every rendered color comes straight from the served params —
 * the view never invents values.
 */

export function rgbCss(r: number, g: number, b: number): string {
  const ch = (v: number) => Math.round(Math.min(1, Math.max(0, v)) * 255);
  return `rgb(${ch(r)}, ${ch(g)}, ${ch(b)})`;
}

/** Ordered parameter values from a params object (service key order p0..p5
 *  is not guaranteed in JS objects, so sort by name). */
export function orderedValues(params: Record<string, number>): number[] {
  return Object.keys(params)
    .sort()
    .map((k) => params[k]);
}

export function bannerSvg(params: Record<string, number>): string {
  const v = orderedValues(params);
  if (v.length !== 6) {
    throw new Error(`banner-colors template needs 6 parameters, got ${v.length}`);
  }
  const bg = rgbCss(v[0], v[1], v[2]);
  const fg = rgbCss(v[3], v[4], v[5]);
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 320 120" role="img">`,
    `<rect width="320" height="120" rx="8" fill="${bg}"/>`,
    `<text x="160" y="52" text-anchor="middle" font-family="sans-serif" font-size="24" font-weight="bold" fill="${fg}">Spring Sale</text>`,
    `<rect x="110" y="72" width="100" height="28" rx="14" fill="${fg}"/>`,
    `<text x="160" y="91" text-anchor="middle" font-family="sans-serif" font-size="13" fill="${bg}">Shop now</text>`,
    `</svg>`,
  ].join("");
}
