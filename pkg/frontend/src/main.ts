export { boot } from "./app";
